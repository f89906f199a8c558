use alloc::vec;
use alloc::vec::Vec;

use super::mask::LaneMask;
use crate::error::{Error, Result};
use crate::tensor::TensorF32;

/// Ground-truth or predicted field pair at map resolution.
///
/// `haf` is `(1, H, W)`: only the x-component is stored since the horizontal
/// field's y-component is identically zero. `vaf` is `(2, H, W)` with the x
/// component in channel 0 and y in channel 1 (negative y points up).
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityPair {
    pub haf: TensorF32,
    pub vaf: TensorF32,
}

impl AffinityPair {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            haf: TensorF32::zeros(&[1, height, width]).expect("positive dims"),
            vaf: TensorF32::zeros(&[2, height, width]).expect("positive dims"),
        }
    }

    /// `(height, width)` after checking both maps agree.
    pub fn resolution(&self) -> Result<(usize, usize)> {
        let (hc, hh, hw) = self.haf.planes()?;
        let (vc, vh, vw) = self.vaf.planes()?;
        if hc != 1 || vc != 2 || (hh, hw) != (vh, vw) {
            return Err(Error::ShapeMismatch {
                op: "affinity pair",
                left: self.haf.dims().to_vec(),
                right: self.vaf.dims().to_vec(),
            });
        }
        Ok((hh, hw))
    }

    pub fn haf_at(&self, y: usize, x: usize, width: usize) -> f32 {
        self.haf.data()[y * width + x]
    }

    pub fn vaf_at(&self, y: usize, x: usize, height: usize, width: usize) -> (f32, f32) {
        let d = self.vaf.data();
        (d[y * width + x], d[height * width + y * width + x])
    }
}

/// Per-lane, per-row centre x: the mean x of the lane's pixels in that row,
/// rounded to the nearest half pixel. Indexed `[lane - 1][row]`.
pub fn lane_centers(mask: &LaneMask) -> Vec<Vec<Option<f32>>> {
    let lanes = mask.lane_count();
    let mut sums = vec![vec![(0usize, 0usize); mask.height()]; lanes];
    for y in 0..mask.height() {
        for (x, &l) in mask.row(y).iter().enumerate() {
            if l != 0 {
                let e = &mut sums[l as usize - 1][y];
                e.0 += x;
                e.1 += 1;
            }
        }
    }
    sums.into_iter()
        .map(|rows| {
            rows.into_iter()
                .map(|(s, n)| (n > 0).then(|| libm::round(2.0 * s as f64 / n as f64) as f32 / 2.0))
                .collect()
        })
        .collect()
}

fn sign(v: f32) -> f32 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Ground-truth fields for a valid lane mask, built row by row from the bottom.
///
/// HAF is the sign of `centre_y - x` (0 at the centre pixel). VAF is the unit
/// vector from the pixel to the lane's centre in the nearest row above that
/// still holds the lane (normally `y - 1`); a lane's top row gets `(0, -1)`.
/// Background stays 0 in both fields.
pub fn encode_affinities(mask: &LaneMask) -> Result<AffinityPair> {
    mask.validate()?;
    let (h, w) = (mask.height(), mask.width());
    let centers = lane_centers(mask);
    let mut pair = AffinityPair::zeros(h, w);
    let mut haf = vec![0.0f32; h * w];
    let mut vaf = vec![0.0f32; 2 * h * w];
    for y in (0..h).rev() {
        for (lane, x0, x1) in mask.runs(y) {
            let rows = &centers[lane as usize - 1];
            let here = rows[y].expect("run implies a centre");
            let above = (0..y).rev().find_map(|yy| rows[yy].map(|c| (c, yy)));
            for x in x0..x1 {
                haf[y * w + x] = sign(here - x as f32);
                let (vx, vy) = match above {
                    Some((c, yy)) => {
                        let dx = (c - x as f32) as f64;
                        let dy = yy as f64 - y as f64;
                        let n = libm::sqrt(dx * dx + dy * dy);
                        ((dx / n) as f32, (dy / n) as f32)
                    }
                    None => (0.0, -1.0),
                };
                vaf[y * w + x] = vx;
                vaf[h * w + y * w + x] = vy;
            }
        }
    }
    pair.haf.data_mut().copy_from_slice(&haf);
    pair.vaf.data_mut().copy_from_slice(&vaf);
    Ok(pair)
}
