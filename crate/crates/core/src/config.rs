//! One TOML file drives every stage of an experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentationSpec, IndexMode, NoiseStage, SelectionPolicy};
use crate::data::synth::{KeySignalConfig, SynthConfig};
use crate::data::{InputFormat, PrepareConfig};
use crate::error::{Error, Result};
use crate::eval::SweepConfig;
use crate::model::ModelConfig;
use crate::tta::TtaConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum SyntheticSource {
    Desk(SynthConfig),
    KeySignal(KeySignalConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Raw interaction log (csv, tsv or json lines).
    #[serde(default)]
    pub input: Option<PathBuf>,
    /// Defaults to the input file's extension.
    #[serde(default)]
    pub format: Option<InputFormat>,
    /// Generated log instead of `input`.
    #[serde(default)]
    pub synthetic: Option<SyntheticSource>,
    #[serde(default = "default_k_core")]
    pub k_core: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_k_core() -> usize {
    5
}

fn default_max_len() -> usize {
    50
}

impl DatasetConfig {
    pub fn prepare_config(&self) -> PrepareConfig {
        PrepareConfig {
            k_core: self.k_core,
            max_len: self.max_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Training-time augmentation applied before training (ID-level only).
    #[serde(default)]
    pub expand: Option<AugmentationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub exclude_seen: bool,
    /// Key annotation json (user → positions in the test input). Relative
    /// paths are resolved against the output directory.
    #[serde(default)]
    pub keys: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Operators compared by the similarity analysis.
    #[serde(default = "default_similarity_operators")]
    pub similarity_operators: Vec<AugmentationSpec>,
    /// Operators compared by the timing analysis.
    #[serde(default = "default_timing_operators")]
    pub timing_operators: Vec<AugmentationSpec>,
    /// Catalog sizes for timing; empty means `|V|` and `4·|V|`.
    #[serde(default)]
    pub catalog_sizes: Vec<usize>,
    #[serde(default = "default_timing_users")]
    pub timing_users: usize,
    #[serde(default = "default_timing_runs")]
    pub timing_runs: usize,
}

fn default_similarity_operators() -> Vec<AugmentationSpec> {
    let random = SelectionPolicy::Random;
    vec![
        AugmentationSpec::Crop { ratio: 0.6 },
        AugmentationSpec::Reorder { ratio: 0.3 },
        AugmentationSpec::SlidingWindow { window: 5 },
        AugmentationSpec::Mask {
            ratio: 0.3,
            selection: random,
        },
        AugmentationSpec::Substitute {
            ratio: 0.3,
            selection: random,
            index: IndexMode::Live,
        },
        AugmentationSpec::Insert {
            ratio: 0.3,
            selection: random,
            index: IndexMode::Live,
        },
        AugmentationSpec::tnoise_from_pair(1.0, 0.5, NoiseStage::Embedding),
        AugmentationSpec::TMaskB { sigma: 0.3 },
        AugmentationSpec::TMaskR { sigma: 0.3 },
    ]
}

fn default_timing_operators() -> Vec<AugmentationSpec> {
    vec![
        AugmentationSpec::Substitute {
            ratio: 0.3,
            selection: SelectionPolicy::Random,
            index: IndexMode::Live,
        },
        AugmentationSpec::tnoise_from_pair(1.0, 0.5, NoiseStage::Embedding),
        AugmentationSpec::TMaskR { sigma: 0.5 },
    ]
}

fn default_timing_users() -> usize {
    500
}

fn default_timing_runs() -> usize {
    3
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            similarity_operators: default_similarity_operators(),
            timing_operators: default_timing_operators(),
            catalog_sizes: Vec::new(),
            timing_users: default_timing_users(),
            timing_runs: default_timing_runs(),
        }
    }
}

fn default_seed() -> u64 {
    42
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_parallel() -> usize {
    1
}

/// `global_seed` seeds model initialisation, shuffling and augmentation;
/// it overrides `model.seed` and `tta.global_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub global_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads for evaluation and training.
    #[serde(default = "default_parallel")]
    pub parallel: usize,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub tta: Option<TtaConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.apply_seed(cfg.global_seed);
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn apply_seed(&mut self, seed: u64) {
        self.global_seed = seed;
        self.model.seed = seed;
        if let Some(t) = &mut self.tta {
            t.global_seed = seed;
        }
    }

    /// Checks everything up front so no stage starts on a bad config.
    pub fn validate(&self) -> Result<()> {
        let d = &self.dataset;
        match (&d.input, &d.synthetic) {
            (Some(_), Some(_)) => return Err(Error::config("dataset: set either input or synthetic, not both")),
            (None, None) => return Err(Error::config("dataset: one of input or synthetic is required")),
            _ => {}
        }
        if d.k_core == 0 {
            return Err(Error::config("dataset.k_core must be at least 1"));
        }
        if d.max_len < 3 {
            return Err(Error::config("dataset.max_len must be at least 3"));
        }
        if self.parallel == 0 {
            return Err(Error::config("parallel must be at least 1"));
        }
        self.model.validate()?;
        if self.model.max_len < d.max_len {
            return Err(Error::config(format!(
                "model.max_len {} is shorter than dataset.max_len {}",
                self.model.max_len, d.max_len
            )));
        }
        if let Some(spec) = &self.train.expand {
            spec.validate()?;
            if spec.is_representation_level() {
                return Err(Error::config(format!(
                    "train.expand: {} cannot expand a training set",
                    spec.name()
                )));
            }
        }
        if let Some(t) = &self.tta {
            t.validate()?;
            if let Some(sweep) = &self.sweep {
                sweep.points(t)?;
            }
        }
        for spec in self.analysis.similarity_operators.iter().chain(&self.analysis.timing_operators) {
            spec.validate()?;
        }
        if self.analysis.timing_runs == 0 || self.analysis.timing_users == 0 {
            return Err(Error::config("analysis timing_runs and timing_users must be at least 1"));
        }
        Ok(())
    }
}
