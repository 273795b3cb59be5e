use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use super::{evaluate_users, EvalOptions};
use crate::augment::ItemSimilarityIndex;
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::model::SequenceModel;
use crate::rng::purpose_stream;
use crate::tta::TtaConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    /// Operator label, or `base` for unaugmented scoring.
    pub operator: String,
    /// Median wall time (seconds) at each catalog size.
    pub seconds: Vec<f64>,
    /// Similarity queries issued per pass at each size (Substitute/Insert).
    pub similarity_queries: Vec<usize>,
    /// Time at the largest size over time at the smallest.
    pub growth_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub catalog_sizes: Vec<usize>,
    pub users: usize,
    pub runs: usize,
    pub base: TimingEntry,
    pub operators: Vec<TimingEntry>,
}

impl TimingReport {
    pub fn entry(&self, operator_name: &str) -> Option<&TimingEntry> {
        self.operators.iter().find(|e| e.operator.starts_with(operator_name))
    }
}

const MIN_SAMPLE_SECONDS: f64 = 0.5;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Counts similarity queries one TTA pass would issue (Live index).
fn count_queries(model: &SequenceModel, split: &DatasetSplit, tta: &TtaConfig, opts: &EvalOptions) -> Result<usize> {
    if !tta.spec.uses_similarity_index() {
        return Ok(0);
    }
    let index = ItemSimilarityIndex::new(&model.item_embedding.value, model.num_items, tta.spec.index_mode())?;
    let mut n = 0;
    for (i, u) in split.users.iter().enumerate() {
        let ctx = crate::augment::AugmentContext {
            mask_id: model.mask_id(),
            max_len: model.config.max_len,
            index: Some(&index),
            keys: opts.keys.as_ref().map(|k| k[i].as_slice()),
        };
        crate::tta::generate_variants(&u.test_input(), u.user, tta, &ctx)?;
        n = index.query_count();
    }
    Ok(n)
}

/// TTA inference time per operator at each catalog size. Larger catalogs
/// extend the trained model with fresh item rows; the first `users`
/// evaluation users are timed. Each sample repeats the pass until half a
/// second has elapsed and keeps the mean pass time; `runs` interleaved rounds
/// follow a warm-up round and the median sample is kept.
pub fn timing_report(
    model: &SequenceModel,
    split: &DatasetSplit,
    operators: &[TtaConfig],
    catalog_sizes: &[usize],
    users: usize,
    runs: usize,
    opts: &EvalOptions,
) -> Result<TimingReport> {
    if catalog_sizes.len() < 2 {
        return Err(Error::config("timing needs at least two catalog sizes"));
    }
    if catalog_sizes.iter().any(|&s| s < model.num_items) {
        return Err(Error::config(format!(
            "catalog sizes must be at least the trained catalog ({})",
            model.num_items
        )));
    }
    if runs == 0 {
        return Err(Error::config("timing needs at least one run"));
    }
    let mut subset = split.clone();
    subset.users.truncate(users.max(1));
    subset.train.clear();
    let mut opts = opts.clone();
    if let Some(k) = &mut opts.keys {
        k.truncate(subset.users.len());
    }

    let configs: Vec<Option<&TtaConfig>> = std::iter::once(None).chain(operators.iter().map(Some)).collect();
    let grown: Vec<(SequenceModel, DatasetSplit)> = catalog_sizes
        .iter()
        .enumerate()
        .map(|(si, &size)| -> Result<_> {
            let g = model.with_catalog_size(size, &mut purpose_stream(model.config.seed, "catalog", si as u64))?;
            let mut data = subset.clone();
            data.num_items = size;
            Ok((g, data))
        })
        .collect::<Result<_>>()?;
    // samples[config][size]; rounds interleave every (size, config) pass so
    // a slow spell on the machine lands in one round only
    let mut samples = vec![vec![Vec::with_capacity(runs); grown.len()]; configs.len()];
    for round in 0..=runs {
        for (si, (g, data)) in grown.iter().enumerate() {
            for (ci, cfg) in configs.iter().enumerate() {
                // short passes repeat until the sample is long enough that
                // timer jitter and brief stalls average out
                let start = Instant::now();
                let mut reps = 0u32;
                loop {
                    evaluate_users(g, data, *cfg, &opts)?;
                    reps += 1;
                    if start.elapsed().as_secs_f64() >= MIN_SAMPLE_SECONDS {
                        break;
                    }
                }
                // round 0 is a warm-up
                if round > 0 {
                    samples[ci][si].push(start.elapsed().as_secs_f64() / f64::from(reps));
                }
            }
        }
        info!("timing round {round} of {runs} done");
    }
    let mut seconds = vec![Vec::new(); configs.len()];
    let mut queries = vec![Vec::new(); configs.len()];
    for (ci, cfg) in configs.iter().enumerate() {
        for (si, (g, data)) in grown.iter().enumerate() {
            seconds[ci].push(median(std::mem::take(&mut samples[ci][si])));
            queries[ci].push(match cfg {
                Some(c) => count_queries(g, data, c, &opts)?,
                None => 0,
            });
        }
    }
    let mut entries: Vec<TimingEntry> = configs
        .iter()
        .zip(seconds.into_iter().zip(queries))
        .map(|(cfg, (secs, q))| TimingEntry {
            operator: cfg.map_or_else(|| "base".to_string(), |c| c.spec.label()),
            growth_ratio: secs[secs.len() - 1] / secs[0].max(1e-12),
            seconds: secs,
            similarity_queries: q,
        })
        .collect();
    let base = entries.remove(0);
    Ok(TimingReport {
        catalog_sizes: catalog_sizes.to_vec(),
        users: subset.users.len(),
        runs,
        base,
        operators: entries,
    })
}
