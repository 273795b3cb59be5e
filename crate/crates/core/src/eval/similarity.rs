use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_keys, EvalOptions};
use crate::augment::{AugmentContext, ItemSimilarityIndex};
use crate::data::DatasetSplit;
use crate::error::Result;
use crate::model::{EncodeHooks, SequenceModel};
use crate::tta::{generate_variants, TtaConfig, Variant};

/// Cosine similarity, or `None` when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub operator: String,
    /// Mean over every (user, variant) pair.
    pub mean: f64,
    pub pairs: usize,
    /// Pairs skipped because a hidden vector was zero.
    pub skipped_zero: usize,
    /// Quartiles of the per-user mean similarity: min, q1, median, q3, max.
    pub per_user_quartiles: [f64; 5],
}

fn quartiles(mut xs: Vec<f64>) -> [f64; 5] {
    if xs.is_empty() {
        return [f64::NAN; 5];
    }
    xs.sort_unstable_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = q * (xs.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
    };
    [at(0.0), at(0.25), at(0.5), at(0.75), at(1.0)]
}

/// Cosine between the final hidden state of each augmented variant and
/// of the original test input. Hook effects are included.
pub fn similarity_report(
    model: &SequenceModel,
    split: &DatasetSplit,
    tta: &TtaConfig,
    opts: &EvalOptions,
) -> Result<SimilarityReport> {
    check_keys(split, Some(tta), opts)?;
    let index = if tta.spec.uses_similarity_index() {
        Some(ItemSimilarityIndex::new(
            &model.item_embedding.value,
            model.num_items,
            tta.spec.index_mode(),
        )?)
    } else {
        None
    };
    let per_user: Vec<(Vec<f64>, usize)> = split
        .users
        .par_iter()
        .enumerate()
        .map(|(i, u)| -> Result<(Vec<f64>, usize)> {
            let input = u.test_input();
            let original = model.final_hidden(&input, &mut EncodeHooks::none())?;
            let ctx = AugmentContext {
                mask_id: model.mask_id(),
                max_len: model.config.max_len,
                index: index.as_ref(),
                keys: opts.keys.as_ref().map(|k| k[i].as_slice()),
            };
            let mut sims = Vec::new();
            let mut skipped = 0;
            for v in generate_variants(&input, u.user, tta, &ctx)? {
                let h = match v {
                    Variant::Sequence(s) => model.final_hidden(&s, &mut EncodeHooks::none())?,
                    Variant::Hooked(mut hooks) => model.final_hidden(&input, &mut hooks)?,
                };
                match cosine(&h, &original) {
                    Some(c) => sims.push(c),
                    None => skipped += 1,
                }
            }
            Ok((sims, skipped))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut pairs = 0;
    let mut skipped_zero = 0;
    let mut user_means = Vec::new();
    for (sims, skipped) in &per_user {
        total += sims.iter().sum::<f64>();
        pairs += sims.len();
        skipped_zero += skipped;
        if !sims.is_empty() {
            user_means.push(sims.iter().sum::<f64>() / sims.len() as f64);
        }
    }
    Ok(SimilarityReport {
        operator: tta.spec.label(),
        mean: if pairs == 0 { f64::NAN } else { total / pairs as f64 },
        pairs,
        skipped_zero,
        per_user_quartiles: quartiles(user_means),
    })
}
