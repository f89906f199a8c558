//! Annotation geometry: TuSimple-style lane labels, their rasterization into
//! map-resolution lane masks, resampling of decoded lanes back onto
//! `h_samples`, and seeded image noise.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};

use crate::affinity::{DecodedLanes, LaneMask};
use crate::error::{invalid, Result};
use crate::rng::seeded;
use crate::tensor::TensorF32;
use crate::{ORIG_HEIGHT, ORIG_WIDTH};

/// x value marking a lane as absent at an `h_sample`.
pub const ABSENT: i32 = -2;

/// One frame's lanes as x positions over shared y samples, in original
/// 1280×720 pixel coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct LaneAnnotation {
    pub lanes: Vec<Vec<i32>>,
    pub h_samples: Vec<i32>,
    pub raw_file: String,
    /// Milliseconds; only present on prediction files.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub run_time: Option<i64>,
}

impl LaneAnnotation {
    pub fn validate(&self) -> Result<()> {
        for (i, lane) in self.lanes.iter().enumerate() {
            if lane.len() != self.h_samples.len() {
                return Err(invalid(format!(
                    "lane {i} has {} x values for {} h_samples",
                    lane.len(),
                    self.h_samples.len()
                )));
            }
            if let Some(x) = lane
                .iter()
                .find(|&&x| x != ABSENT && !(0..ORIG_WIDTH as i32).contains(&x))
            {
                return Err(invalid(format!("lane {i} has x = {x}")));
            }
        }
        Ok(())
    }

    /// Present `(x, y)` vertices of lane `i`.
    pub fn vertices(&self, i: usize) -> Vec<(f64, f64)> {
        self.lanes[i]
            .iter()
            .zip(&self.h_samples)
            .filter(|(&x, _)| x != ABSENT)
            .map(|(&x, &y)| (x as f64, y as f64))
            .collect()
    }
}

/// A decoded frame ready for training-style use.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    /// `(3, 352, 640)` RGB in `[0, 1]`.
    pub image: TensorF32,
    pub mask: LaneMask,
    pub annotation: LaneAnnotation,
}

impl FrameRecord {
    /// Builds a record from 8-bit interleaved RGB at network input size.
    pub fn from_rgb8(rgb: &[u8], mask: LaneMask, annotation: LaneAnnotation) -> Result<Self> {
        let (h, w) = (crate::INPUT_HEIGHT, crate::INPUT_WIDTH);
        if rgb.len() != 3 * h * w {
            return Err(invalid(format!("expected {} RGB bytes, got {}", 3 * h * w, rgb.len())));
        }
        let image = TensorF32::from_fn(&[3, h, w], |i| {
            let (c, p) = (i / (h * w), i % (h * w));
            rgb[p * 3 + c] as f32 / 255.0
        })?;
        Ok(Self {
            image,
            mask,
            annotation,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rasterized {
    pub mask: LaneMask,
    /// Annotation lane indices skipped for having fewer than two vertices.
    pub skipped: Vec<usize>,
}

/// Horizontal extent `(x_min, x_max)` of a polyline inside the band
/// `y0 <= y <= y1`, if it enters the band at all.
fn band_extent(pts: &[(f64, f64)], y0: f64, y1: f64) -> Option<(f64, f64)> {
    let mut ext: Option<(f64, f64)> = None;
    let mut push = |x: f64| {
        ext = Some(match ext {
            None => (x, x),
            Some((a, b)) => (a.min(x), b.max(x)),
        })
    };
    for s in pts.windows(2) {
        let ((xa, ya), (xb, yb)) = (s[0], s[1]);
        let (lo, hi) = (ya.min(yb), ya.max(yb));
        if hi < y0 || lo > y1 {
            continue;
        }
        if ya == yb {
            push(xa);
            push(xb);
            continue;
        }
        let at = |y: f64| xa + (xb - xa) * (y - ya) / (yb - ya);
        push(at(lo.max(y0)));
        push(at(hi.min(y1)));
    }
    ext
}

/// Draws every lane with at least two present vertices into a `height×width`
/// mask.
///
/// Vertices are scaled from 1280×720 to map coordinates where pixel `k` is
/// centred on `k`. Row `r` takes the polyline's x extent over `[r-0.5, r+0.5]`
/// and fills columns `x_min - t/2 <= k < x_max + t/2`. Later lanes overwrite
/// earlier ones; a lane cut in two by an overwrite keeps its longest run, and
/// ids are renumbered so that they stay contiguous.
pub fn rasterize(ann: &LaneAnnotation, out_res: (usize, usize), thickness: usize) -> Result<Rasterized> {
    ann.validate()?;
    let (h, w) = out_res;
    if thickness == 0 || h == 0 || w == 0 {
        return Err(invalid("rasterize needs thickness >= 1 and a non-empty grid"));
    }
    let sx = w as f64 / ORIG_WIDTH as f64;
    let sy = h as f64 / ORIG_HEIGHT as f64;
    let half = thickness as f64 / 2.0;

    let mut labels = vec![0u16; h * w];
    let mut skipped = Vec::new();
    let mut next_id = 0u16;
    for i in 0..ann.lanes.len() {
        let pts: Vec<(f64, f64)> = ann.vertices(i).into_iter().map(|(x, y)| (x * sx, y * sy)).collect();
        if pts.len() < 2 {
            skipped.push(i);
            continue;
        }
        next_id += 1;
        for r in 0..h {
            let Some((x0, x1)) = band_extent(&pts, r as f64 - 0.5, r as f64 + 0.5) else {
                continue;
            };
            // the frame's last original column scales to just under `w`
            let (x0, x1) = (x0.min(w as f64 - 1.0), x1.min(w as f64 - 1.0));
            let k0 = libm::ceil(x0 - half).max(0.0) as usize;
            let k1 = (libm::ceil(x1 + half).min(w as f64)).max(0.0) as usize;
            for k in k0..k1 {
                labels[r * w + k] = next_id;
            }
        }
    }

    keep_longest_runs(&mut labels, h, w, next_id);
    compact_ids(&mut labels, next_id);
    Ok(Rasterized {
        mask: LaneMask::from_labels(h, w, labels)?,
        skipped,
    })
}

fn keep_longest_runs(labels: &mut [u16], h: usize, w: usize, lanes: u16) {
    for r in 0..h {
        let row = &mut labels[r * w..(r + 1) * w];
        let mut best = vec![(0usize, 0usize); lanes as usize + 1];
        let mut x = 0;
        while x < w {
            let l = row[x];
            let s = x;
            while x < w && row[x] == l {
                x += 1;
            }
            let b = &mut best[l as usize];
            if x - s > b.1 - b.0 {
                *b = (s, x);
            }
        }
        for (x, l) in row.iter_mut().enumerate() {
            let (s, e) = best[*l as usize];
            if *l != 0 && !(s..e).contains(&x) {
                *l = 0;
            }
        }
    }
}

fn compact_ids(labels: &mut [u16], lanes: u16) {
    let mut seen = vec![false; lanes as usize + 1];
    for &l in labels.iter() {
        seen[l as usize] = true;
    }
    let mut remap = vec![0u16; lanes as usize + 1];
    let mut next = 0;
    for l in 1..=lanes as usize {
        if seen[l] {
            next += 1;
            remap[l] = next;
        }
    }
    for l in labels.iter_mut() {
        *l = remap[*l as usize];
    }
}

/// Resamples decoded lanes onto `h_samples` in 1280×720 coordinates.
///
/// Points are scaled up from the cluster map's resolution and x is linearly
/// interpolated at each sample inside a lane's y extent; samples outside the
/// extent or off-image are [`ABSENT`].
pub fn lanes_to_annotation(d: &DecodedLanes, h_samples: &[i32], raw_file: &str) -> LaneAnnotation {
    let sx = ORIG_WIDTH as f64 / d.cluster_map.width() as f64;
    let sy = ORIG_HEIGHT as f64 / d.cluster_map.height() as f64;
    let lanes = d
        .lanes
        .iter()
        .map(|lane| {
            // decoded points run bottom to top; interpolate on ascending y
            let mut pts: Vec<(f64, f64)> = lane
                .points
                .iter()
                .map(|&(x, y)| (x as f64 * sx, y as f64 * sy))
                .collect();
            pts.reverse();
            h_samples.iter().map(|&ys| sample_x(&pts, ys as f64)).collect()
        })
        .collect();
    LaneAnnotation {
        lanes,
        h_samples: h_samples.to_vec(),
        raw_file: raw_file.into(),
        run_time: None,
    }
}

fn sample_x(pts: &[(f64, f64)], y: f64) -> i32 {
    let (first, last) = match (pts.first(), pts.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return ABSENT,
    };
    if y < first.1 || y > last.1 {
        return ABSENT;
    }
    let x = if pts.len() == 1 {
        first.0
    } else {
        let i = pts.partition_point(|p| p.1 < y).clamp(1, pts.len() - 1);
        let ((xa, ya), (xb, yb)) = (pts[i - 1], pts[i]);
        xa + (xb - xa) * (y - ya) / (yb - ya)
    };
    let x = libm::round(x);
    if (0.0..ORIG_WIDTH as f64).contains(&x) {
        x as i32
    } else {
        ABSENT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum NoiseKind {
    /// `x + e`
    Gaussian,
    /// `x * (1 + e)`
    Speckle,
}

/// Adds `e ~ N(0, sigma²)` noise per element and clamps to `[0, 1]`.
pub fn add_noise(image: &TensorF32, kind: NoiseKind, sigma: f32, seed: u64) -> Result<TensorF32> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let normal = Normal::new(0.0f32, sigma).map_err(|e| invalid(format!("{e}")))?;
    let mut rng = seeded(seed);
    let data = image
        .data()
        .iter()
        .map(|&x| {
            let e = normal.sample(&mut rng);
            let y = match kind {
                NoiseKind::Gaussian => x + e,
                NoiseKind::Speckle => x * (1.0 + e),
            };
            y.clamp(0.0, 1.0)
        })
        .collect();
    TensorF32::new(image.dims().to_vec(), data)
}
