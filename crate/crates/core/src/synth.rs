//! Seeded synthetic lane scenes.
//!
//! Lanes are quadratics in the original 1280×720 frame, parameterized by the
//! distance `t = 710 - y` from the bottom sample:
//! `x(t) = a·t² + b·t + c`. Bottom intercepts `c` are `spacing` map pixels
//! apart around the image centre, slopes `b` make the lanes converge toward a
//! point above the top sample, and `a` is a shared curvature plus a small
//! per-lane jitter. The annotation is rasterized with [`crate::dataset::rasterize`].

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::affinity::{AffinityPair, LaneMask};
use crate::dataset::{rasterize, LaneAnnotation, ABSENT};
use crate::error::{invalid, Result};
use crate::rng::{derive_seed, seeded};
use crate::tensor::TensorF32;
use crate::{MAP_HEIGHT, MAP_WIDTH, ORIG_WIDTH};

pub const MAX_LANES: usize = 6;
/// Fewest map rows a generated lane may cover.
pub const MIN_LANE_ROWS: usize = 8;

/// TuSimple's sample rows, 160 to 710 every 10 px.
pub fn default_h_samples() -> Vec<i32> {
    (160..=710).step_by(10).collect()
}

const BOTTOM: f64 = 710.0;
const SPAN: f64 = 550.0;
/// Original pixels per map pixel horizontally.
const X_SCALE: f64 = ORIG_WIDTH as f64 / MAP_WIDTH as f64;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSpec {
    pub lane_count: usize,
    /// Range of the shared quadratic coefficient, in original pixels per
    /// pixel². Per-lane jitter is a tenth of the range's width.
    pub curvature: (f64, f64),
    /// Distance between neighbouring lanes at the bottom row, map pixels.
    pub spacing: f64,
    /// Stroke thickness, map pixels.
    pub width: usize,
    /// Cut one lane off part way up the image.
    pub merge_split: bool,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            lane_count: 4,
            curvature: (0.0, 0.0),
            spacing: 30.0,
            width: 2,
            merge_split: false,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LANES).contains(&self.lane_count) {
            return Err(invalid(format!("lane_count {} outside 1..={MAX_LANES}", self.lane_count)));
        }
        if self.width == 0 || self.spacing < 3.0 * self.width as f64 {
            return Err(invalid(format!(
                "spacing {} must be at least 3x width {}",
                self.spacing, self.width
            )));
        }
        if !(self.curvature.0 <= self.curvature.1) || !self.curvature.0.is_finite() || !self.curvature.1.is_finite() {
            return Err(invalid("curvature range must be finite and ordered"));
        }
        Ok(())
    }

    /// A spec with randomized lane count, curvature, spacing and a 20%
    /// chance of `merge_split`.
    pub fn random(seed: u64) -> Self {
        let mut rng = seeded(seed);
        let lane_count = rng.random_range(1..=MAX_LANES);
        let k = rng.random_range(0.0..3e-4);
        let curvature = if rng.random_bool(0.5) { (-k, -k * 0.5) } else { (k * 0.5, k) };
        Self {
            lane_count,
            curvature,
            spacing: rng.random_range(22.0..40.0),
            width: 2,
            merge_split: rng.random_bool(0.2),
            seed: rng.random(),
        }
    }
}

/// Builds and rasterizes the scene described by `spec`.
///
/// Fails when lanes would come closer than `3·width` map pixels in any
/// sampled row, or when a lane would cover fewer than [`MIN_LANE_ROWS`] rows.
pub fn generate(spec: &SceneSpec) -> Result<(LaneMask, LaneAnnotation)> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let h_samples = default_h_samples();
    let n = spec.lane_count;

    let base = if spec.curvature.0 == spec.curvature.1 {
        spec.curvature.0
    } else {
        rng.random_range(spec.curvature.0..=spec.curvature.1)
    };
    let jitter = (spec.curvature.1 - spec.curvature.0) / 10.0;
    // vanishing point between 1.4 and 1.8 spans above the bottom row
    let vanish_t = SPAN * rng.random_range(1.4..1.8);
    let vanish_x = ORIG_WIDTH as f64 / 2.0 + rng.random_range(-80.0..80.0);
    let offset = rng.random_range(-0.3..0.3) * spec.spacing;

    let mut coeffs = Vec::with_capacity(n);
    for i in 0..n {
        let c_map = MAP_WIDTH as f64 / 2.0 + offset + (i as f64 - (n as f64 - 1.0) / 2.0) * spec.spacing;
        let c = c_map * X_SCALE;
        let b = (vanish_x - c) / vanish_t;
        let a = if jitter > 0.0 { base + rng.random_range(-jitter..jitter) } else { base };
        coeffs.push((a, b, c));
    }
    let xs: Vec<Vec<f64>> = coeffs
        .iter()
        .map(|&(a, b, c)| {
            h_samples
                .iter()
                .map(|&y| {
                    let t = BOTTOM - y as f64;
                    a * t * t + b * t + c
                })
                .collect()
        })
        .collect();

    let min_gap = 3.0 * spec.width as f64 * X_SCALE;
    for (j, &y) in h_samples.iter().enumerate() {
        for i in 1..n {
            if xs[i][j] - xs[i - 1][j] < min_gap {
                return Err(invalid(format!("lanes {} and {} too close at y={y}", i - 1, i)));
            }
        }
    }

    let mut lanes: Vec<Vec<i32>> = xs
        .iter()
        .map(|row| {
            row.iter()
                .map(|&x| {
                    let x = libm::round(x);
                    if (0.0..ORIG_WIDTH as f64).contains(&x) {
                        x as i32
                    } else {
                        ABSENT
                    }
                })
                .collect()
        })
        .collect();
    if spec.merge_split {
        let victim = rng.random_range(0..n);
        let cut = rng.random_range(300..=550);
        for (x, &y) in lanes[victim].iter_mut().zip(&h_samples) {
            if y < cut {
                *x = ABSENT;
            }
        }
    }

    let ann = LaneAnnotation {
        lanes,
        h_samples,
        raw_file: format!("synth/{:016x}.jpg", spec.seed),
        run_time: None,
    };
    let r = rasterize(&ann, (MAP_HEIGHT, MAP_WIDTH), spec.width)?;
    if !r.skipped.is_empty() || r.mask.lane_count() != n {
        return Err(invalid(format!(
            "{} of {n} lanes survived rasterization",
            r.mask.lane_count()
        )));
    }
    let mut rows = alloc::vec![0usize; n];
    for y in 0..r.mask.height() {
        for (l, _, _) in r.mask.runs(y) {
            rows[l as usize - 1] += 1;
        }
    }
    if let Some(i) = rows.iter().position(|&c| c < MIN_LANE_ROWS) {
        return Err(invalid(format!("lane {} covers only {} rows", i + 1, rows[i])));
    }
    Ok((r.mask, ann))
}

/// Draws random specs from `seed` until one generates, giving up after 64
/// attempts.
pub fn random_scene(seed: u64) -> Result<(SceneSpec, LaneMask, LaneAnnotation)> {
    let mut last = None;
    for attempt in 0..64 {
        let spec = SceneSpec::random(derive_seed(seed, attempt));
        match generate(&spec) {
            Ok((mask, ann)) => return Ok((spec, mask, ann)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Adds seeded noise to fields on lane pixels (where the VAF is nonzero).
///
/// Each VAF vector is rotated by an angle drawn from `N(0, sigma²)` radians
/// and renormalized; each HAF value gets additive `N(0, sigma²)` noise and is
/// clamped to `[-1, 1]`.
pub fn perturb_fields(af: &AffinityPair, sigma: f32, seed: u64) -> Result<AffinityPair> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let (h, w) = af.resolution()?;
    if sigma == 0.0 {
        return Ok(af.clone());
    }
    let normal = Normal::new(0.0f64, sigma as f64).map_err(|e| invalid(format!("{e}")))?;
    let mut rng = seeded(seed);
    let plane = h * w;
    let mut haf = af.haf.data().to_vec();
    let mut vaf = af.vaf.data().to_vec();
    for i in 0..plane {
        let (vx, vy) = (vaf[i] as f64, vaf[plane + i] as f64);
        if vx == 0.0 && vy == 0.0 {
            continue;
        }
        let th = normal.sample(&mut rng);
        let (s, c) = (libm::sin(th), libm::cos(th));
        let (rx, ry) = (c * vx - s * vy, s * vx + c * vy);
        let norm = libm::sqrt(rx * rx + ry * ry);
        vaf[i] = (rx / norm) as f32;
        vaf[plane + i] = (ry / norm) as f32;
        haf[i] = (haf[i] as f64 + normal.sample(&mut rng)).clamp(-1.0, 1.0) as f32;
    }
    Ok(AffinityPair {
        haf: TensorF32::new(af.haf.dims().to_vec(), haf)?,
        vaf: TensorF32::new(af.vaf.dims().to_vec(), vaf)?,
    })
}
