//! Full-catalog ranking evaluation and the analysis drivers built on it.

mod metrics;
pub mod report;
mod similarity;
mod sweep;
mod timing;

pub use metrics::{hit_at_k, ndcg_at_k, rank_of_target, MetricReport, CUTOFFS};
pub use similarity::{cosine, similarity_report, SimilarityReport};
pub use sweep::{sweep, SweepAxis, SweepConfig, SweepRow};
pub use timing::{timing_report, TimingEntry, TimingReport};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::{AugmentContext, ItemSimilarityIndex};
use crate::data::{DatasetSplit, UserSplit};
use crate::error::{Error, Result};
use crate::model::SequenceModel;
use crate::tta::{base_scores, predict_with_tta, PredictionScores, ScoreSpace, TtaConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Push items already in the test input to the bottom of the ranking.
    pub exclude_seen: bool,
    /// Key positions aligned with `split.users`; needed by key-aware
    /// selection policies.
    pub keys: Option<Vec<Vec<usize>>>,
}

/// Per-user outcome of one evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserOutcome {
    pub user: usize,
    pub rank: usize,
    pub top_k: Vec<usize>,
    pub wall_time: f64,
}

fn exclude_seen(scores: &mut PredictionScores, seen: &[usize]) {
    for &i in seen {
        if (1..=scores.len()).contains(&i) {
            scores.values[i - 1] = f64::NEG_INFINITY;
        }
    }
}

pub(crate) fn check_keys(split: &DatasetSplit, tta: Option<&TtaConfig>, opts: &EvalOptions) -> Result<()> {
    if let Some(cfg) = tta {
        if cfg.spec.selection().needs_keys() {
            match &opts.keys {
                None => {
                    return Err(Error::config(format!(
                        "{} needs key annotations",
                        cfg.spec.label()
                    )))
                }
                Some(k) if k.len() != split.users.len() => {
                    return Err(Error::Contract("key list not aligned with users".into()))
                }
                _ => {}
            }
        }
    }
    Ok(())
}

/// Ranks each user's test target given the test input, with or without
/// TTA. Users are processed in parallel; outcomes keep split order.
pub fn evaluate_users(
    model: &SequenceModel,
    split: &DatasetSplit,
    tta: Option<&TtaConfig>,
    opts: &EvalOptions,
) -> Result<Vec<UserOutcome>> {
    if split.num_items != model.num_items {
        return Err(Error::Contract(format!(
            "model has {} items, dataset {}",
            model.num_items, split.num_items
        )));
    }
    check_keys(split, tta, opts)?;
    let index = match tta {
        Some(cfg) if cfg.spec.uses_similarity_index() => Some(ItemSimilarityIndex::new(
            &model.item_embedding.value,
            model.num_items,
            cfg.spec.index_mode(),
        )?),
        _ => None,
    };
    split
        .users
        .par_iter()
        .enumerate()
        .map(|(i, u): (usize, &UserSplit)| {
            let input = u.test_input();
            let (mut scores, wall_time, top_k) = match tta {
                None => {
                    let start = Instant::now();
                    let s = base_scores(model, &input, ScoreSpace::Probability)?;
                    let top = s.top_k(20);
                    (s, start.elapsed().as_secs_f64(), top)
                }
                Some(cfg) => {
                    let ctx = AugmentContext {
                        mask_id: model.mask_id(),
                        max_len: model.config.max_len,
                        index: index.as_ref(),
                        keys: opts.keys.as_ref().map(|k| k[i].as_slice()),
                    };
                    let r = predict_with_tta(model, &input, u.user, cfg, &ctx)?;
                    (r.aggregated, r.wall_time, r.top_k)
                }
            };
            let top_k = if opts.exclude_seen {
                exclude_seen(&mut scores, &input);
                scores.top_k(top_k.len())
            } else {
                top_k
            };
            Ok(UserOutcome {
                user: u.user,
                rank: rank_of_target(&scores, u.test_target),
                top_k,
                wall_time,
            })
        })
        .collect()
}

/// HR/NDCG at 5, 10 and 20 over all evaluation users.
pub fn evaluate(
    model: &SequenceModel,
    split: &DatasetSplit,
    tta: Option<&TtaConfig>,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    let start = Instant::now();
    let outcomes = evaluate_users(model, split, tta, opts)?;
    let ranks: Vec<usize> = outcomes.iter().map(|o| o.rank).collect();
    let report = MetricReport::from_ranks(&ranks, start.elapsed().as_secs_f64());
    debug_assert!(report.check_invariants());
    Ok(report)
}
