//! Test-time augmentation: score `m` augmented variants of a sequence and
//! average the predictions.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::augment::{apply_id_level, representation_hooks, AugmentContext, AugmentationSpec};
use crate::error::{Error, Result};
use crate::model::{EncodeHooks, SequenceModel};
use crate::rng::variant_stream;
use crate::tensor::softmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSpace {
    Logit,
    /// Softmax each variant's logits, then average.
    #[default]
    Probability,
}

/// One score per real item; `values[i]` belongs to item id `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionScores {
    pub values: Vec<f64>,
    pub space: ScoreSpace,
}

impl PredictionScores {
    pub fn new(values: Vec<f64>, space: ScoreSpace) -> Self {
        Self { values, space }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_probability(&self) -> Self {
        match self.space {
            ScoreSpace::Probability => self.clone(),
            ScoreSpace::Logit => Self::new(softmax(&self.values), ScoreSpace::Probability),
        }
    }

    /// Item ids of the `k` best scores: descending score, ties by ascending id.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = (1..=self.values.len()).collect();
        let by_score = |a: &usize, b: &usize| {
            self.values[*b - 1]
                .total_cmp(&self.values[*a - 1])
                .then(a.cmp(b))
        };
        let k = k.min(ids.len());
        if k == 0 {
            return Vec::new();
        }
        if k < ids.len() {
            ids.select_nth_unstable_by(k - 1, by_score);
            ids.truncate(k);
        }
        ids.sort_unstable_by(by_score);
        ids
    }
}

fn default_m() -> usize {
    10
}

fn default_top_k() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtaConfig {
    pub spec: AugmentationSpec,
    #[serde(default = "default_m")]
    pub m: usize,
    /// Adds the unaugmented prediction to the pool.
    #[serde(default)]
    pub include_original: bool,
    #[serde(default)]
    pub aggregate_space: ScoreSpace,
    #[serde(default)]
    pub global_seed: u64,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Keep every variant's scores in the result.
    #[serde(default)]
    pub keep_variant_scores: bool,
}

impl TtaConfig {
    pub fn new(spec: AugmentationSpec, m: usize) -> Self {
        Self {
            spec,
            m,
            include_original: false,
            aggregate_space: ScoreSpace::Probability,
            global_seed: 0,
            top_k: default_top_k(),
            keep_variant_scores: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("tta.m must be at least 1"));
        }
        self.spec.validate()
    }
}

/// One augmented input: a rewritten sequence, or the original sequence
/// run through perturbing hooks.
pub enum Variant {
    Sequence(Vec<usize>),
    Hooked(EncodeHooks<'static>),
}

/// `m` variants of `seq`; variant `i` draws from stream `(seed, user, i)`.
pub fn generate_variants(
    seq: &[usize],
    user: usize,
    config: &TtaConfig,
    ctx: &AugmentContext<'_>,
) -> Result<Vec<Variant>> {
    if seq.is_empty() {
        return Err(Error::Contract("cannot augment an empty sequence".into()));
    }
    (0..config.m)
        .map(|i| {
            let mut rng = variant_stream(config.global_seed, user, i);
            if config.spec.is_representation_level() {
                Ok(Variant::Hooked(representation_hooks(&config.spec, rng)?))
            } else {
                Ok(Variant::Sequence(apply_id_level(&config.spec, seq, ctx, &mut rng)?))
            }
        })
        .collect()
}

/// Arithmetic mean of the pool in the requested space. Vectors are summed
/// in lexicographic order of their values, so the result does not depend
/// on the order of the pool.
pub fn aggregate(scores: &[PredictionScores], space: ScoreSpace) -> Result<PredictionScores> {
    let first = scores
        .first()
        .ok_or_else(|| Error::config("cannot aggregate an empty prediction pool"))?;
    let n = first.len();
    if scores.iter().any(|s| s.len() != n) {
        return Err(Error::Contract("prediction vectors differ in length".into()));
    }
    let pool: Vec<PredictionScores> = match space {
        ScoreSpace::Probability => scores.iter().map(PredictionScores::to_probability).collect(),
        ScoreSpace::Logit => {
            if scores.iter().any(|s| s.space != ScoreSpace::Logit) {
                return Err(Error::Contract("logit aggregation needs logit inputs".into()));
            }
            scores.to_vec()
        }
    };
    let mut order: Vec<&PredictionScores> = pool.iter().collect();
    order.sort_by(|a, b| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = order[0].values.clone();
    for s in &order[1..] {
        for (acc, v) in values.iter_mut().zip(&s.values) {
            *acc += v;
        }
    }
    let m = pool.len() as f64;
    values.iter_mut().for_each(|v| *v /= m);
    Ok(PredictionScores::new(values, space))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtaResult {
    pub aggregated: PredictionScores,
    pub top_k: Vec<usize>,
    /// `m` rows, plus the original last when it is pooled.
    pub per_variant_scores: Option<Vec<PredictionScores>>,
    /// Variant generation + scoring + aggregation.
    pub wall_time: f64,
}

/// Unaugmented prediction in the space used for ranking.
pub fn base_scores(model: &SequenceModel, seq: &[usize], space: ScoreSpace) -> Result<PredictionScores> {
    let logits = model.score_sequence(seq, &mut EncodeHooks::none())?;
    Ok(match space {
        ScoreSpace::Logit => logits,
        ScoreSpace::Probability => logits.to_probability(),
    })
}

/// Scores every variant of `seq` and averages them.
pub fn predict_with_tta(
    model: &SequenceModel,
    seq: &[usize],
    user: usize,
    config: &TtaConfig,
    ctx: &AugmentContext<'_>,
) -> Result<TtaResult> {
    let start = Instant::now();
    let variants = generate_variants(seq, user, config, ctx)?;
    let mut pool = Vec::with_capacity(variants.len() + 1);
    for v in variants {
        pool.push(match v {
            Variant::Sequence(s) => model.score_sequence(&s, &mut EncodeHooks::none())?,
            Variant::Hooked(mut hooks) => model.score_sequence(seq, &mut hooks)?,
        });
    }
    if config.include_original {
        pool.push(model.score_sequence(seq, &mut EncodeHooks::none())?);
    }
    let aggregated = aggregate(&pool, config.aggregate_space)?;
    let top_k = aggregated.top_k(config.top_k);
    let wall_time = start.elapsed().as_secs_f64();
    Ok(TtaResult {
        aggregated,
        top_k,
        per_variant_scores: config.keep_variant_scores.then_some(pool),
        wall_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> PredictionScores {
        PredictionScores::new(v.to_vec(), ScoreSpace::Probability)
    }

    #[test]
    fn mean_of_two_distributions() {
        let out = aggregate(&[p(&[1.0, 0.0]), p(&[0.0, 1.0])], ScoreSpace::Probability).unwrap();
        assert_eq!(out.values, vec![0.5, 0.5]);
    }

    #[test]
    fn identical_inputs_pass_through() {
        let x = PredictionScores::new(vec![0.3, -1.2, 2.5], ScoreSpace::Logit);
        let out = aggregate(&[x.clone(), x.clone(), x.clone()], ScoreSpace::Logit).unwrap();
        assert_eq!(out, x);
        let out = aggregate(&[x.clone(), x.clone()], ScoreSpace::Probability).unwrap();
        assert_eq!(out, x.to_probability());
    }

    #[test]
    fn empty_pool_is_an_error() {
        assert!(matches!(aggregate(&[], ScoreSpace::Logit), Err(Error::Config(_))));
    }

    #[test]
    fn top_k_breaks_ties_by_id() {
        let s = PredictionScores::new(vec![0.2, 0.5, 0.5, 0.1, 0.5], ScoreSpace::Logit);
        assert_eq!(s.top_k(4), vec![2, 3, 5, 1]);
        assert_eq!(s.top_k(10).len(), 5);
    }

    #[test]
    fn config_defaults() {
        let c: TtaConfig = toml::from_str("[spec]\nkind = \"tmask-r\"\nsigma = 0.5\n").unwrap();
        assert_eq!(c.m, 10);
        assert!(!c.include_original);
        assert_eq!(c.aggregate_space, ScoreSpace::Probability);
        assert!(TtaConfig { m: 0, ..c }.validate().is_err());
    }
}
