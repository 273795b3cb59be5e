use serde::{Deserialize, Serialize};

use crate::tta::PredictionScores;

pub const CUTOFFS: [usize; 3] = [5, 10, 20];

/// 1-based rank of `target` over the whole catalog. Items with a strictly
/// higher score rank above it, and so do equal-score items with smaller ids.
pub fn rank_of_target(scores: &PredictionScores, target: usize) -> usize {
    assert!(
        target >= 1 && target <= scores.values.len(),
        "target {target} outside [1, {}]",
        scores.values.len()
    );
    let t = scores.values[target - 1];
    let mut rank = 1;
    for (idx, &s) in scores.values.iter().enumerate() {
        if s > t || (s == t && idx + 1 < target) {
            rank += 1;
        }
    }
    rank
}

pub fn hit_at_k(rank: usize, k: usize) -> f64 {
    debug_assert!(rank >= 1);
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

/// Single-relevant-item NDCG (ideal DCG = 1).
pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    debug_assert!(rank >= 1);
    if rank <= k {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

/// HR@K / NDCG@K at K ∈ {5, 10, 20}, averaged over users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hr: [f64; 3],
    pub ndcg: [f64; 3],
    pub num_users: usize,
    pub inference_seconds: f64,
}

impl MetricReport {
    /// Averages per-user ranks in the given (fixed) order.
    pub fn from_ranks(ranks: &[usize], inference_seconds: f64) -> Self {
        let mut hr = [0.0; 3];
        let mut ndcg = [0.0; 3];
        for &r in ranks {
            for (j, &k) in CUTOFFS.iter().enumerate() {
                hr[j] += hit_at_k(r, k);
                ndcg[j] += ndcg_at_k(r, k);
            }
        }
        let n = ranks.len().max(1) as f64;
        for j in 0..3 {
            hr[j] /= n;
            ndcg[j] /= n;
        }
        Self {
            hr,
            ndcg,
            num_users: ranks.len(),
            inference_seconds,
        }
    }

    pub fn hr_at(&self, k: usize) -> f64 {
        self.hr[cutoff_index(k)]
    }

    pub fn ndcg_at(&self, k: usize) -> f64 {
        self.ndcg[cutoff_index(k)]
    }

    pub fn inference_minutes(&self) -> f64 {
        self.inference_seconds / 60.0
    }

    /// Bounds, monotonicity in K and NDCG ≤ HR.
    pub fn check_invariants(&self) -> bool {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        self.hr.iter().chain(&self.ndcg).all(|&v| in_unit(v))
            && self.hr.windows(2).all(|w| w[0] <= w[1])
            && self.ndcg.windows(2).all(|w| w[0] <= w[1])
            && self.hr.iter().zip(&self.ndcg).all(|(h, n)| n <= h)
    }

    /// Metric values only, without timing.
    pub fn same_metrics(&self, other: &Self) -> bool {
        self.hr == other.hr && self.ndcg == other.ndcg && self.num_users == other.num_users
    }
}

fn cutoff_index(k: usize) -> usize {
    CUTOFFS
        .iter()
        .position(|&c| c == k)
        .unwrap_or_else(|| panic!("K={k} is not one of {CUTOFFS:?}"))
}
