use alloc::vec;
use alloc::vec::Vec;

use super::mask::LaneMask;

/// Fraction of ground-truth foreground pixels whose predicted lane label
/// matches under the best one-to-one relabelling. Returns 1 when the ground
/// truth has no foreground.
pub fn lane_identity_agreement(gt: &LaneMask, pred: &LaneMask) -> f64 {
    assert_eq!(
        (gt.height(), gt.width()),
        (pred.height(), pred.width()),
        "agreement needs equal resolutions"
    );
    let total = gt.foreground_count();
    if total == 0 {
        return 1.0;
    }
    let (g, p) = (gt.lane_count(), pred.lane_count());
    let mut overlap = vec![vec![0u64; p]; g];
    for (&a, &b) in gt.labels().iter().zip(pred.labels()) {
        if a != 0 && b != 0 {
            overlap[a as usize - 1][b as usize - 1] += 1;
        }
    }
    best_matching(&overlap) as f64 / total as f64
}

/// Maximum-weight one-to-one matching by DP over subsets of the smaller side.
fn best_matching(w: &[Vec<u64>]) -> u64 {
    let rows = w.len();
    let cols = w.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return 0;
    }
    let (small, large, get): (usize, usize, &dyn Fn(usize, usize) -> u64) = if rows <= cols {
        (rows, cols, &|s, l| w[s][l])
    } else {
        (cols, rows, &|s, l| w[l][s])
    };
    assert!(small <= 20, "too many lanes for exact matching");
    let full = 1usize << small;
    let mut dp = vec![0u64; full];
    for l in 0..large {
        // iterate masks descending so each large-side lane is used at most once
        for mask in (0..full).rev() {
            for s in 0..small {
                if mask & (1 << s) == 0 {
                    let next = mask | (1 << s);
                    let cand = dp[mask] + get(s, l);
                    if cand > dp[next] {
                        dp[next] = cand;
                    }
                }
            }
        }
    }
    dp.into_iter().max().unwrap_or(0)
}
