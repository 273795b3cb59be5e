use log::info;
use serde::{Deserialize, Serialize};

use super::{evaluate, EvalOptions, MetricReport};
use crate::data::DatasetSplit;
use crate::error::{Error, Result};
use crate::model::SequenceModel;
use crate::tta::TtaConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Sigma,
    NoiseInterval,
    M,
    Ratio,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Sigma => "sigma",
            SweepAxis::NoiseInterval => "noise_interval",
            SweepAxis::M => "m",
            SweepAxis::Ratio => "ratio",
        }
    }
}

/// Grid for one axis. `values` drives sigma, m and ratio sweeps; `pairs`
/// drives noise-interval sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
    #[serde(default)]
    pub pairs: Vec<[f64; 2]>,
}

impl SweepConfig {
    /// `[0.1, 0.2, …, 0.9]`.
    pub fn sigma_grid() -> Self {
        Self {
            axis: SweepAxis::Sigma,
            values: (1..=9).map(|i| i as f64 / 10.0).collect(),
            pairs: Vec::new(),
        }
    }

    pub fn m_grid() -> Self {
        Self {
            axis: SweepAxis::M,
            values: vec![5.0, 7.0, 9.0, 10.0, 11.0, 13.0, 15.0],
            pairs: Vec::new(),
        }
    }

    pub fn noise_grid() -> Self {
        Self {
            axis: SweepAxis::NoiseInterval,
            values: Vec::new(),
            pairs: vec![[0.005, 0.001], [0.05, 0.01], [0.5, 0.1], [1.0, 0.5], [2.0, 1.0]],
        }
    }

    pub fn len(&self) -> usize {
        match self.axis {
            SweepAxis::NoiseInterval => self.pairs.len(),
            _ => self.values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::config(format!("{} sweep has an empty grid", self.axis.label())));
        }
        if self.axis == SweepAxis::M
            && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0)
        {
            return Err(Error::config("m sweep values must be positive integers"));
        }
        Ok(())
    }

    /// TTA configurations for each grid point, with the point's label.
    pub fn points(&self, base: &TtaConfig) -> Result<Vec<(String, TtaConfig)>> {
        self.validate()?;
        let out: Vec<(String, TtaConfig)> = match self.axis {
            SweepAxis::NoiseInterval => self
                .pairs
                .iter()
                .map(|&[a, b]| {
                    let spec = base.spec.with_noise_pair(a, b)?;
                    Ok((format!("({a},{b})"), TtaConfig { spec, ..base.clone() }))
                })
                .collect::<Result<_>>()?,
            SweepAxis::Sigma => self
                .values
                .iter()
                .map(|&v| Ok((v.to_string(), TtaConfig { spec: base.spec.with_sigma(v)?, ..base.clone() })))
                .collect::<Result<_>>()?,
            SweepAxis::Ratio => self
                .values
                .iter()
                .map(|&v| Ok((v.to_string(), TtaConfig { spec: base.spec.with_ratio(v)?, ..base.clone() })))
                .collect::<Result<_>>()?,
            SweepAxis::M => self
                .values
                .iter()
                .map(|&v| (v.to_string(), TtaConfig { m: v as usize, ..base.clone() }))
                .collect(),
        };
        for (_, c) in &out {
            c.validate()?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub point: String,
    pub operator: String,
    pub m: usize,
    pub report: MetricReport,
}

/// One evaluation per grid point, all with the same seed.
pub fn sweep(
    model: &SequenceModel,
    split: &DatasetSplit,
    base: &TtaConfig,
    grid: &SweepConfig,
    opts: &EvalOptions,
) -> Result<Vec<SweepRow>> {
    grid.points(base)?
        .into_iter()
        .map(|(point, cfg)| {
            let report = evaluate(model, split, Some(&cfg), opts)?;
            info!(
                "{} = {point}: HR@10 {:.4} NDCG@10 {:.4}",
                grid.axis.label(),
                report.hr_at(10),
                report.ndcg_at(10)
            );
            Ok(SweepRow {
                axis: grid.axis,
                point,
                operator: cfg.spec.label(),
                m: cfg.m,
                report,
            })
        })
        .collect()
}
