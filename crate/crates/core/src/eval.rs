//! TuSimple-style lane scoring.
//!
//! A predicted vertex is correct when it lies within `px_threshold` of the
//! ground-truth x at the same `h_sample`. Predicted lanes are paired one to
//! one with ground-truth lanes, greedily by descending per-lane accuracy;
//! pairs under `lane_match_threshold` count as a false prediction and a
//! missed lane.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{LaneAnnotation, ABSENT};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalConfig {
    /// Pixels at 1280×720.
    pub px_threshold: f64,
    pub lane_match_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            px_threshold: 20.0,
            lane_match_threshold: 0.85,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.px_threshold > 0.0 && self.lane_match_threshold > 0.0) {
            return Err(invalid("eval thresholds must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalCounts {
    /// Correct vertices over all matched pairs.
    pub n_correct: u64,
    /// Present ground-truth vertices.
    pub n_gt: u64,
    /// Predicted lanes that are unmatched or matched below threshold.
    pub n_false: u64,
    pub n_pred: u64,
    /// Ground-truth lanes without an above-threshold match.
    pub n_missed: u64,
    /// Ground-truth lanes with at least one present vertex.
    pub n_gt_lanes: u64,
}

impl core::ops::Add for EvalCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            n_correct: self.n_correct + o.n_correct,
            n_gt: self.n_gt + o.n_gt,
            n_false: self.n_false + o.n_false,
            n_pred: self.n_pred + o.n_pred,
            n_missed: self.n_missed + o.n_missed,
            n_gt_lanes: self.n_gt_lanes + o.n_gt_lanes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalResult {
    pub accuracy: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    /// `None` when precision or recall is undefined.
    pub f1: Option<f64>,
    pub counts: EvalCounts,
}

impl EvalResult {
    /// Ratios from counts. Empty denominators give accuracy 1 and zero rates.
    pub fn from_counts(counts: EvalCounts) -> Self {
        let ratio = |n: u64, d: u64, empty: f64| if d == 0 { empty } else { n as f64 / d as f64 };
        let accuracy = ratio(counts.n_correct, counts.n_gt, 1.0);
        let fp_rate = ratio(counts.n_false, counts.n_pred, 0.0);
        let fn_rate = ratio(counts.n_missed, counts.n_gt_lanes, 0.0);
        Self {
            accuracy,
            fp_rate,
            fn_rate,
            f1: f1_paper(accuracy, fp_rate, fn_rate).ok(),
            counts,
        }
    }
}

/// Correct-vertex count of `pred` against `gt` (same `h_samples`).
pub fn correct_vertices(pred: &[i32], gt: &[i32], px_threshold: f64) -> u64 {
    pred.iter()
        .zip(gt)
        .filter(|(&p, &g)| g != ABSENT && p != ABSENT && ((p - g) as f64).abs() <= px_threshold)
        .count() as u64
}

fn present(lane: &[i32]) -> u64 {
    lane.iter().filter(|&&x| x != ABSENT).count() as u64
}

/// Pairwise correct-vertex table `[gt][pred]` over ground-truth lanes with at
/// least one present vertex, plus each such lane's present count.
pub fn score_table(pred: &LaneAnnotation, gt: &LaneAnnotation, cfg: &EvalConfig) -> (Vec<Vec<u64>>, Vec<u64>) {
    let gts: Vec<&Vec<i32>> = gt.lanes.iter().filter(|l| present(l) > 0).collect();
    let table = gts
        .iter()
        .map(|g| pred.lanes.iter().map(|p| correct_vertices(p, g, cfg.px_threshold)).collect())
        .collect();
    (table, gts.iter().map(|g| present(g)).collect())
}

/// Counts for a given one-to-one pairing `(gt, pred)` of a score table.
pub fn counts_for_matching(
    table: &[Vec<u64>],
    gt_present: &[u64],
    n_pred: usize,
    pairs: &[(usize, usize)],
    cfg: &EvalConfig,
) -> EvalCounts {
    let mut c = EvalCounts {
        n_gt: gt_present.iter().sum(),
        n_pred: n_pred as u64,
        n_gt_lanes: gt_present.len() as u64,
        ..EvalCounts::default()
    };
    let mut hits = 0u64;
    for &(g, p) in pairs {
        let correct = table[g][p];
        c.n_correct += correct;
        if correct as f64 / gt_present[g] as f64 >= cfg.lane_match_threshold {
            hits += 1;
        }
    }
    c.n_false = c.n_pred - hits;
    c.n_missed = c.n_gt_lanes - hits;
    c
}

/// Scores one frame.
pub fn evaluate_frame(pred: &LaneAnnotation, gt: &LaneAnnotation, cfg: &EvalConfig) -> Result<EvalResult> {
    cfg.validate()?;
    if pred.h_samples != gt.h_samples {
        return Err(invalid(format!(
            "h_samples differ for `{}` ({} vs {} samples)",
            gt.raw_file,
            pred.h_samples.len(),
            gt.h_samples.len()
        )));
    }
    pred.validate()?;
    gt.validate()?;
    let (table, gt_present) = score_table(pred, gt, cfg);

    let mut candidates = Vec::new();
    for (g, row) in table.iter().enumerate() {
        for (p, &correct) in row.iter().enumerate() {
            if correct > 0 {
                candidates.push((correct as f64 / gt_present[g] as f64, g, p));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; table.len()];
    let mut pred_used = vec![false; pred.lanes.len()];
    let mut pairs = Vec::new();
    for (_, g, p) in candidates {
        if !gt_used[g] && !pred_used[p] {
            gt_used[g] = true;
            pred_used[p] = true;
            pairs.push((g, p));
        }
    }
    let counts = counts_for_matching(&table, &gt_present, pred.lanes.len(), &pairs, cfg);
    Ok(EvalResult::from_counts(counts))
}

/// Pools counts over frames and recomputes the ratios.
pub fn aggregate(results: &[EvalResult]) -> Result<EvalResult> {
    if results.is_empty() {
        return Err(invalid("cannot aggregate zero frames"));
    }
    let counts = results.iter().fold(EvalCounts::default(), |acc, r| acc + r.counts);
    Ok(EvalResult::from_counts(counts))
}

/// F1 with accuracy standing in for the true-positive count:
/// `P = acc / (acc + fp)`, `R = acc / (acc + fn)`, `F1 = 2PR / (P + R)`.
pub fn f1_paper(accuracy: f64, fp_rate: f64, fn_rate: f64) -> Result<f64> {
    for (name, v) in [("accuracy", accuracy), ("fp", fp_rate), ("fn", fn_rate)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(format!("{name} = {v} outside [0, 1]")));
        }
    }
    if accuracy + fp_rate == 0.0 || accuracy + fn_rate == 0.0 {
        return Err(invalid("precision or recall undefined"));
    }
    let p = accuracy / (accuracy + fp_rate);
    let r = accuracy / (accuracy + fn_rate);
    if p + r == 0.0 {
        return Err(invalid("precision and recall are both zero"));
    }
    Ok(2.0 * p * r / (p + r))
}
