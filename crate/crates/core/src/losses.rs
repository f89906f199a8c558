//! Training losses as pure functions: weighted BCE on segmentation logits,
//! soft IoU on segmentation probabilities and a foreground-only L1 on the
//! affinity fields. Sums are accumulated in `f64`.
//!
//! Each loss has a matching `*_grad` returning the per-element derivative with
//! respect to its prediction input.

use alloc::format;
use alloc::vec::Vec;

use crate::affinity::AffinityPair;
use crate::error::{invalid, Error, Result};
use crate::tensor::TensorF32;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossBreakdown {
    pub wbce: f64,
    pub iou: f64,
    pub af: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_components(wbce: f64, iou: f64, af: f64) -> Self {
        Self {
            wbce,
            iou,
            af,
            total: wbce + iou + af,
        }
    }
}

fn check_binary(t: &TensorF32, what: &str) -> Result<()> {
    if let Some(v) = t.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(invalid(format!("{what} must be 0 or 1, found {v}")));
    }
    Ok(())
}

fn check_probs(t: &TensorF32) -> Result<()> {
    if let Some(v) = t.data().iter().find(|&&v| !(0.0..=1.0).contains(&v)) {
        return Err(invalid(format!("probability {v} outside [0, 1]")));
    }
    Ok(())
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Background-to-foreground pixel ratio of a binary target; 1 when the target
/// has no foreground or no background.
pub fn default_fg_weight(target: &TensorF32) -> f32 {
    let fg = target.data().iter().filter(|&&v| v > 0.5).count();
    let bg = target.len() - fg;
    if fg == 0 || bg == 0 {
        1.0
    } else {
        bg as f32 / fg as f32
    }
}

/// `-(1/N) Σ [w·t·ln σ(z) + (1-t)·ln(1-σ(z))]`, written with softplus so that
/// saturated logits stay finite.
pub fn wbce_loss(logits: &TensorF32, target: &TensorF32, w: f32) -> Result<f64> {
    logits.ensure_same_shape(target, "wbce_loss")?;
    check_binary(target, "wbce target")?;
    if !(w > 0.0) {
        return Err(invalid(format!("wbce weight must be positive, got {w}")));
    }
    let w = w as f64;
    let sum: f64 = logits
        .data()
        .iter()
        .zip(target.data())
        .map(|(&z, &t)| {
            let z = z as f64;
            if t > 0.5 {
                w * softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum();
    Ok(sum / logits.len() as f64)
}

pub fn wbce_grad(logits: &TensorF32, target: &TensorF32, w: f32) -> Result<Vec<f64>> {
    logits.ensure_same_shape(target, "wbce_grad")?;
    let n = logits.len() as f64;
    let w = w as f64;
    Ok(logits
        .data()
        .iter()
        .zip(target.data())
        .map(|(&z, &t)| {
            let s = sigmoid(z as f64);
            let t = t as f64;
            ((1.0 - t) * s - w * t * (1.0 - s)) / n
        })
        .collect())
}

fn iou_sums(probs: &TensorF32, target: &TensorF32) -> (f64, f64) {
    probs
        .data()
        .iter()
        .zip(target.data())
        .fold((0.0, 0.0), |(i, u), (&p, &t)| {
            let (p, t) = (p as f64, t as f64);
            (i + p * t, u + p + t - p * t)
        })
}

/// Soft IoU loss `1 - Σ p·t / Σ (p + t - p·t)`; 0 when the union is empty.
pub fn iou_loss(probs: &TensorF32, target: &TensorF32) -> Result<f64> {
    probs.ensure_same_shape(target, "iou_loss")?;
    check_probs(probs)?;
    check_binary(target, "iou target")?;
    let (i, u) = iou_sums(probs, target);
    if u == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - i / u)
}

pub fn iou_grad(probs: &TensorF32, target: &TensorF32) -> Result<Vec<f64>> {
    probs.ensure_same_shape(target, "iou_grad")?;
    let (i, u) = iou_sums(probs, target);
    if u == 0.0 {
        return Ok(alloc::vec![0.0; probs.len()]);
    }
    Ok(target
        .data()
        .iter()
        .map(|&t| {
            let t = t as f64;
            -(t * u - i * (1.0 - t)) / (u * u)
        })
        .collect())
}

fn af_shapes(pred_haf: &TensorF32, pred_vaf: &TensorF32, gt: &AffinityPair, fg: &TensorF32) -> Result<usize> {
    let (h, w) = gt.resolution()?;
    let mismatch = |t: &TensorF32, c: usize| -> Result<()> {
        if t.planes()? != (c, h, w) {
            return Err(Error::ShapeMismatch {
                op: "af_loss",
                left: t.dims().to_vec(),
                right: alloc::vec![c, h, w],
            });
        }
        Ok(())
    };
    mismatch(pred_haf, 1)?;
    mismatch(pred_vaf, 2)?;
    mismatch(fg, 1)?;
    check_binary(fg, "af foreground")?;
    Ok(h * w)
}

/// Mean over foreground pixels of the summed absolute HAF and VAF errors; 0
/// without foreground.
pub fn af_loss(pred_haf: &TensorF32, pred_vaf: &TensorF32, gt: &AffinityPair, fg: &TensorF32) -> Result<f64> {
    let plane = af_shapes(pred_haf, pred_vaf, gt, fg)?;
    let (ph, pv) = (pred_haf.data(), pred_vaf.data());
    let (th, tv) = (gt.haf.data(), gt.vaf.data());
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for (i, _) in fg.data().iter().enumerate().filter(|(_, &f)| f > 0.5) {
        n += 1;
        sum += (th[i] as f64 - ph[i] as f64).abs();
        sum += (tv[i] as f64 - pv[i] as f64).abs();
        sum += (tv[plane + i] as f64 - pv[plane + i] as f64).abs();
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Derivatives of [`af_loss`] with respect to the predicted HAF and VAF. At
/// exact ties the subgradient 0 is used.
pub fn af_grad(
    pred_haf: &TensorF32,
    pred_vaf: &TensorF32,
    gt: &AffinityPair,
    fg: &TensorF32,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let plane = af_shapes(pred_haf, pred_vaf, gt, fg)?;
    let n = fg.data().iter().filter(|&&f| f > 0.5).count();
    let mut gh = alloc::vec![0.0; plane];
    let mut gv = alloc::vec![0.0; 2 * plane];
    if n == 0 {
        return Ok((gh, gv));
    }
    let sign = |o: f32, t: f32| {
        let d = o as f64 - t as f64;
        if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let n = n as f64;
    for (i, _) in fg.data().iter().enumerate().filter(|(_, &f)| f > 0.5) {
        gh[i] = sign(pred_haf.data()[i], gt.haf.data()[i]) / n;
        for c in 0..2 {
            let j = c * plane + i;
            gv[j] = sign(pred_vaf.data()[j], gt.vaf.data()[j]) / n;
        }
    }
    Ok((gh, gv))
}

/// All three losses for one frame. `seg_target` doubles as the foreground
/// mask for the field loss; `w` defaults to [`default_fg_weight`].
pub fn total_loss(
    seg_logits: &TensorF32,
    pred_haf: &TensorF32,
    pred_vaf: &TensorF32,
    seg_target: &TensorF32,
    gt: &AffinityPair,
    w: Option<f32>,
) -> Result<LossBreakdown> {
    let w = w.unwrap_or_else(|| default_fg_weight(seg_target));
    let wbce = wbce_loss(seg_logits, seg_target, w)?;
    let probs = seg_logits.map(crate::ops::sigmoid_scalar);
    let iou = iou_loss(&probs, seg_target)?;
    let af = af_loss(pred_haf, pred_vaf, gt, seg_target)?;
    Ok(LossBreakdown::from_components(wbce, iou, af))
}
