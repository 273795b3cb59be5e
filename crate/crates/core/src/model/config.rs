use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// GRU over the item embeddings.
    Recurrent,
    /// Learned positions + causal transformer blocks.
    Attention,
}

impl EncoderKind {
    pub fn label(self) -> &'static str {
        match self {
            EncoderKind::Recurrent => "gru",
            EncoderKind::Attention => "attention",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub dim: usize,
    pub max_len: usize,
    pub blocks: usize,
    pub heads: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Early-stopping patience, in epochs without validation NDCG@10 gain.
    pub patience: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderKind::Attention,
            dim: 64,
            max_len: 50,
            blocks: 2,
            heads: 1,
            epochs: 200,
            batch_size: 256,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            patience: 10,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("model.dim must be at least 1"));
        }
        if self.max_len < 3 {
            return Err(Error::config("model.max_len must be at least 3"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("model.batch_size must be at least 1"));
        }
        if self.encoder == EncoderKind::Attention {
            if self.heads == 0 || self.dim % self.heads != 0 {
                return Err(Error::config(format!(
                    "model.dim {} not divisible by {} heads",
                    self.dim, self.heads
                )));
            }
            if self.blocks == 0 {
                return Err(Error::config("model.blocks must be at least 1"));
            }
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2)
        {
            return Err(Error::config("invalid Adam hyperparameters"));
        }
        Ok(())
    }
}
