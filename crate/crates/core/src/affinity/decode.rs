use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::encode::AffinityPair;
use super::mask::LaneMask;
use crate::error::{invalid, Error, Result};
use crate::tensor::TensorF32;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecodeConfig {
    /// Pixels with `seg_prob >= fg_threshold` are foreground.
    pub fg_threshold: f32,
    /// Largest association error (map pixels) that may extend a lane.
    pub assoc_threshold: f32,
    /// Row clusters with fewer pixels are discarded.
    pub min_cluster_size: usize,
    /// Lanes spanning fewer rows are dropped from the result.
    pub min_lane_rows: usize,
    /// Consecutive rows without foreground a lane survives.
    pub max_gap_rows: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            fg_threshold: 0.5,
            assoc_threshold: 12.0,
            min_cluster_size: 2,
            min_lane_rows: 5,
            max_gap_rows: 2,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fg_threshold > 0.0 && self.fg_threshold < 1.0) {
            return Err(invalid(format!("fg_threshold {} outside (0, 1)", self.fg_threshold)));
        }
        if !(self.assoc_threshold > 0.0) {
            return Err(invalid("assoc_threshold must be positive"));
        }
        Ok(())
    }
}

/// Foreground pixels of one row that the HAF groups together.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Column indices, ascending.
    pub pixels: Vec<usize>,
}

impl Cluster {
    pub fn centroid(&self) -> f32 {
        (self.pixels.iter().sum::<usize>() as f64 / self.pixels.len() as f64) as f32
    }
}

/// A lane still being extended: its id and the pixels it claimed in its most
/// recent row.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveLane {
    pub id: u32,
    pub row: usize,
    pub pixels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(lane index, cluster index, error)` in the order they were accepted.
    pub matches: Vec<(usize, usize, f32)>,
    /// Clusters that start new lanes.
    pub new_lanes: Vec<usize>,
    /// Lanes that found no cluster.
    pub ended: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLane {
    pub id: u32,
    /// One `(x, y)` centroid per row at map resolution, bottom row first.
    pub points: Vec<(f32, f32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedLanes {
    pub lanes: Vec<DecodedLane>,
    /// Final lane id per pixel; 0 where nothing was assigned.
    pub cluster_map: LaneMask,
}

/// Splits a row's foreground into clusters.
///
/// Scanning foreground pixels left to right, a new cluster opens whenever the
/// previous foreground pixel's HAF is `<= 0` and the current one's is `> 0`.
/// The first foreground pixel, and any pixel after a background gap, also
/// opens one. Clusters smaller than `min_cluster_size` are dropped.
pub fn cluster_row_haf(haf_row: &[f32], fg_row: &[bool], min_cluster_size: usize) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut prev: Option<(usize, f32)> = None;
    for (x, (&h, &fg)) in haf_row.iter().zip(fg_row).enumerate() {
        if !fg {
            continue;
        }
        let open = match prev {
            None => true,
            Some((px, p)) => px + 1 != x || (p <= 0.0 && h > 0.0),
        };
        if open {
            clusters.push(Cluster { pixels: Vec::new() });
        }
        clusters.last_mut().expect("opened above").pixels.push(x);
        prev = Some((x, h));
    }
    clusters.retain(|c| c.pixels.len() >= min_cluster_size.max(1));
    clusters
}

/// Mean residual between the cluster centroid and each lane pixel moved along
/// its predicted VAF by the pixel–centroid distance.
pub fn association_error(
    lane: &ActiveLane,
    centroid: (f32, f32),
    vaf: &TensorF32,
    height: usize,
    width: usize,
) -> f32 {
    let d = vaf.data();
    let mut total = 0.0f64;
    for &x in &lane.pixels {
        let at = lane.row * width + x;
        let (vx, vy) = (d[at] as f64, d[height * width + at] as f64);
        let dx = centroid.0 as f64 - x as f64;
        let dy = centroid.1 as f64 - lane.row as f64;
        let dist = libm::sqrt(dx * dx + dy * dy);
        let (rx, ry) = (dx - vx * dist, dy - vy * dist);
        total += libm::sqrt(rx * rx + ry * ry);
    }
    (total / lane.pixels.len() as f64) as f32
}

/// Links the clusters of row `y` to active lanes below it.
///
/// Every (lane, cluster) pair gets an [`association_error`]; pairs under
/// `assoc_threshold` are accepted greedily in ascending error so that no
/// cluster is claimed twice. Leftover clusters start new lanes, leftover lanes
/// end.
pub fn associate_clusters_vaf(
    lanes: &[ActiveLane],
    clusters: &[Cluster],
    vaf: &TensorF32,
    y: usize,
    assoc_threshold: f32,
) -> Result<Assignment> {
    let (c, height, width) = vaf.planes()?;
    if c != 2 || y >= height {
        return Err(invalid(format!("vaf dims {:?} / row {y}", vaf.dims())));
    }
    let mut candidates = Vec::new();
    for (li, lane) in lanes.iter().enumerate() {
        for (ci, cl) in clusters.iter().enumerate() {
            let err = association_error(lane, (cl.centroid(), y as f32), vaf, height, width);
            if err <= assoc_threshold {
                candidates.push((li, ci, err));
            }
        }
    }
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut lane_used = vec![false; lanes.len()];
    let mut cluster_used = vec![false; clusters.len()];
    let mut out = Assignment::default();
    for (li, ci, err) in candidates {
        if !lane_used[li] && !cluster_used[ci] {
            lane_used[li] = true;
            cluster_used[ci] = true;
            out.matches.push((li, ci, err));
        }
    }
    out.new_lanes = (0..clusters.len()).filter(|&i| !cluster_used[i]).collect();
    out.ended = (0..lanes.len()).filter(|&i| !lane_used[i]).collect();
    Ok(out)
}

struct Track {
    lane: ActiveLane,
    points: Vec<(f32, f32)>,
    gap: usize,
    active: bool,
}

/// Clusters foreground pixels into lane instances, bottom row to top.
pub fn decode(seg_prob: &TensorF32, af: &AffinityPair, cfg: &DecodeConfig) -> Result<DecodedLanes> {
    cfg.validate()?;
    let (sc, h, w) = seg_prob.planes()?;
    let res = af.resolution()?;
    if sc != 1 || res != (h, w) {
        return Err(Error::ShapeMismatch {
            op: "decode",
            left: seg_prob.dims().to_vec(),
            right: af.vaf.dims().to_vec(),
        });
    }
    let vaf = af.vaf.clone().reshape(vec![2, h, w])?;
    let seg = seg_prob.data();
    let haf = af.haf.data();

    let mut tracks: Vec<Track> = Vec::new();
    let mut labels = vec![0u32; h * w];

    for y in (0..h).rev() {
        let fg: Vec<bool> = seg[y * w..(y + 1) * w].iter().map(|&p| p >= cfg.fg_threshold).collect();
        let clusters = cluster_row_haf(&haf[y * w..(y + 1) * w], &fg, cfg.min_cluster_size);
        if clusters.is_empty() {
            for t in tracks.iter_mut().filter(|t| t.active) {
                t.gap += 1;
                if t.gap > cfg.max_gap_rows {
                    t.active = false;
                }
            }
            continue;
        }
        let active: Vec<usize> = (0..tracks.len()).filter(|&i| tracks[i].active).collect();
        let lanes: Vec<ActiveLane> = active.iter().map(|&i| tracks[i].lane.clone()).collect();
        let assignment = associate_clusters_vaf(&lanes, &clusters, &vaf, y, cfg.assoc_threshold)?;

        for &(li, ci, _) in &assignment.matches {
            let t = &mut tracks[active[li]];
            extend(t, &clusters[ci], y, &mut labels, w);
        }
        for &li in &assignment.ended {
            tracks[active[li]].active = false;
        }
        for &ci in &assignment.new_lanes {
            let id = tracks.len() as u32 + 1;
            let mut t = Track {
                lane: ActiveLane {
                    id,
                    row: y,
                    pixels: Vec::new(),
                },
                points: Vec::new(),
                gap: 0,
                active: true,
            };
            extend(&mut t, &clusters[ci], y, &mut labels, w);
            tracks.push(t);
        }
    }

    // drop short lanes and renumber survivors in creation order
    let mut remap = vec![0u16; tracks.len() + 1];
    let mut lanes = Vec::new();
    for t in &tracks {
        if t.points.len() >= cfg.min_lane_rows {
            let id = lanes.len() as u16 + 1;
            remap[t.lane.id as usize] = id;
            lanes.push(DecodedLane {
                id: id as u32,
                points: t.points.clone(),
            });
        }
    }
    let labels = labels.iter().map(|&l| remap[l as usize]).collect();
    Ok(DecodedLanes {
        lanes,
        cluster_map: LaneMask::from_labels_unchecked(h, w, labels)?,
    })
}

fn extend(t: &mut Track, c: &Cluster, y: usize, labels: &mut [u32], w: usize) {
    for &x in &c.pixels {
        labels[y * w + x] = t.lane.id;
    }
    t.points.push((c.centroid(), y as f32));
    t.lane.row = y;
    t.lane.pixels = c.pixels.clone();
    t.gap = 0;
}
