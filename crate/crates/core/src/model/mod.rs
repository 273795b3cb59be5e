//! Next-item sequence encoders sharing one interface.
//!
//! Both encoders read item embeddings from a table of `|V| + 2` rows
//! (padding, `|V|` real items, mask token) and score candidates with the same
//! table. Sequences are right-aligned: the newest item always sits in the
//! last row, and left padding is only a batching representation.

mod checkpoint;
mod config;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{EncoderKind, ModelConfig};
pub use train::{train, EpochRecord, TrainReport};

use crate::error::{Error, Result};
use crate::rng::purpose_stream;
use crate::tensor::{
    dot, embedding_backward, embedding_forward, BlockCache, GruCache, GruLayer, Matrix,
    Parameter, TransformerBlock,
};
use crate::tta::{PredictionScores, ScoreSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoder {
    Recurrent {
        gru: GruLayer,
    },
    Attention {
        /// One learned row per position, `max_len × d`.
        positions: Parameter,
        blocks: Vec<TransformerBlock>,
    },
}

pub(crate) enum EncoderCache {
    Recurrent(GruCache),
    Attention { offset: usize, blocks: Vec<BlockCache> },
}

/// A shape-preserving transform on an `L × d` representation.
pub type Transform<'a> = Box<dyn FnMut(&Matrix) -> Matrix + 'a>;

/// Optional representation-stage transforms applied by [`SequenceModel::encode`].
#[derive(Default)]
pub struct EncodeHooks<'a> {
    /// Applied to the embedded sequence `E_u` before the encoder.
    pub post_embedding: Option<Transform<'a>>,
    /// Applied to the hidden states `H_u` after the encoder.
    pub post_encoder: Option<Transform<'a>>,
}

impl<'a> EncodeHooks<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.post_embedding.is_none() && self.post_encoder.is_none()
    }
}

fn apply_hook(hook: &mut Option<Transform<'_>>, m: Matrix, stage: &str) -> Result<Matrix> {
    match hook {
        None => Ok(m),
        Some(f) => {
            let out = f(&m);
            if out.shape() != m.shape() {
                return Err(Error::Contract(format!(
                    "{stage} hook changed shape {:?} -> {:?}",
                    m.shape(),
                    out.shape()
                )));
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceModel {
    pub config: ModelConfig,
    pub num_items: usize,
    /// `(|V| + 2) × d`; row 0 is padding (always zero), row `|V| + 1` the mask token.
    pub item_embedding: Parameter,
    pub encoder: Encoder,
    pub trained: bool,
}

impl SequenceModel {
    pub fn new(config: ModelConfig, num_items: usize) -> Result<Self> {
        config.validate()?;
        if num_items == 0 {
            return Err(Error::config("catalog has no items"));
        }
        let mut rng = purpose_stream(config.seed, "init", 0);
        let d = config.dim;
        let mut table = Matrix::xavier(num_items + 2, d, &mut rng);
        table.row_mut(0).fill(0.0);
        let encoder = match config.encoder {
            EncoderKind::Recurrent => Encoder::Recurrent {
                gru: GruLayer::new(d, d, &mut rng),
            },
            EncoderKind::Attention => Encoder::Attention {
                positions: Parameter::new(Matrix::xavier(config.max_len, d, &mut rng)),
                blocks: (0..config.blocks)
                    .map(|_| TransformerBlock::new(d, config.heads, &mut rng))
                    .collect::<Result<_>>()?,
            },
        };
        Ok(Self {
            config,
            num_items,
            item_embedding: Parameter::new(table),
            encoder,
            trained: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn mask_id(&self) -> usize {
        self.num_items + 1
    }

    pub fn kind(&self) -> EncoderKind {
        match self.encoder {
            Encoder::Recurrent { .. } => EncoderKind::Recurrent,
            Encoder::Attention { .. } => EncoderKind::Attention,
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter)) {
        f("item_embedding", &mut self.item_embedding);
        match &mut self.encoder {
            Encoder::Recurrent { gru } => gru.visit_params("gru", f),
            Encoder::Attention { positions, blocks } => {
                f("positions", positions);
                for (i, b) in blocks.iter_mut().enumerate() {
                    b.visit_params(&format!("block{i}"), f);
                }
            }
        }
    }

    /// Row `i` is the embedding of `items[i]`.
    pub fn embed(&self, items: &[usize]) -> Result<Matrix> {
        embedding_forward(&self.item_embedding.value, items)
    }

    /// Left-pads every sequence to `max_len` with zero rows. Returns the
    /// padded matrices and their padding masks (`true` = padding).
    pub fn embed_batch(&self, seqs: &[Vec<usize>]) -> Result<Vec<(Matrix, Vec<bool>)>> {
        let max_len = self.config.max_len;
        seqs.iter()
            .map(|s| {
                let s = &s[s.len().saturating_sub(max_len)..];
                let mut ids = vec![0; max_len - s.len()];
                ids.extend_from_slice(s);
                let pad = ids.iter().map(|&i| i == 0).collect();
                Ok((self.embed(&ids)?, pad))
            })
            .collect()
    }

    fn run_encoder(&self, e: &Matrix) -> Result<Matrix> {
        Ok(self.run_encoder_cached(e)?.0)
    }

    pub(crate) fn run_encoder_cached(&self, e: &Matrix) -> Result<(Matrix, EncoderCache)> {
        let len = e.rows();
        if len == 0 {
            return Err(Error::Contract("cannot encode an empty sequence".into()));
        }
        match &self.encoder {
            Encoder::Recurrent { gru } => {
                let (h, c) = gru.forward(e);
                Ok((h, EncoderCache::Recurrent(c)))
            }
            Encoder::Attention { positions, blocks } => {
                let max_len = positions.value.rows();
                if len > max_len {
                    return Err(Error::Contract(format!(
                        "sequence length {len} exceeds max_len {max_len}"
                    )));
                }
                let offset = max_len - len;
                let mut x = e.clone();
                x.add_assign(&positions.value.slice_rows(offset, max_len));
                let mut caches = Vec::with_capacity(blocks.len());
                for b in blocks {
                    let (y, c) = b.forward(&x, None);
                    caches.push(c);
                    x = y;
                }
                Ok((
                    x,
                    EncoderCache::Attention {
                        offset,
                        blocks: caches,
                    },
                ))
            }
        }
    }

    /// Backpropagates `dh` through the encoder; returns `∂/∂E_u`.
    pub(crate) fn backward_encoder(&mut self, cache: &EncoderCache, dh: &Matrix) -> Matrix {
        match (&mut self.encoder, cache) {
            (Encoder::Recurrent { gru }, EncoderCache::Recurrent(c)) => gru.backward(c, dh),
            (Encoder::Attention { positions, blocks }, EncoderCache::Attention { offset, blocks: caches }) => {
                let mut g = dh.clone();
                for (b, c) in blocks.iter_mut().zip(caches).rev() {
                    g = b.backward(c, &g);
                }
                for r in 0..g.rows() {
                    for (p, v) in positions.grad.row_mut(offset + r).iter_mut().zip(g.row(r)) {
                        *p += v;
                    }
                }
                g
            }
            _ => unreachable!("encoder cache does not match encoder"),
        }
    }

    pub(crate) fn backward_embedding(&mut self, ids: &[usize], de: &Matrix) {
        embedding_backward(&mut self.item_embedding.grad, ids, de);
    }

    /// `post_embedding` hook → encoder → `post_encoder` hook.
    ///
    /// `padding` marks left-padded rows; they are skipped by the encoder and
    /// come back as zero rows.
    pub fn encode(
        &self,
        e_u: &Matrix,
        padding: Option<&[bool]>,
        hooks: &mut EncodeHooks<'_>,
    ) -> Result<Matrix> {
        let e = apply_hook(&mut hooks.post_embedding, e_u.clone(), "post_embedding")?;
        let start = match padding {
            None => 0,
            Some(p) => {
                if p.len() != e.rows() {
                    return Err(Error::Contract("padding mask length mismatch".into()));
                }
                let lead = p.iter().take_while(|&&x| x).count();
                if p[lead..].iter().any(|&x| x) {
                    return Err(Error::Contract("padding must be a prefix".into()));
                }
                lead
            }
        };
        let h_real = self.run_encoder(&e.slice_rows(start, e.rows()))?;
        let mut h = Matrix::zeros(e.rows(), self.dim());
        for r in 0..h_real.rows() {
            h.row_mut(start + r).copy_from_slice(h_real.row(r));
        }
        apply_hook(&mut hooks.post_encoder, h, "post_encoder")
    }

    /// Encoded state at the newest position. Inputs longer than `max_len`
    /// keep their most recent `max_len` items.
    pub fn final_hidden(&self, items: &[usize], hooks: &mut EncodeHooks<'_>) -> Result<Vec<f64>> {
        let items = &items[items.len().saturating_sub(self.config.max_len)..];
        let e = self.embed(items)?;
        let h = self.encode(&e, None, hooks)?;
        Ok(h.row(h.rows() - 1).to_vec())
    }

    /// Dot product of `h_last` with every real item embedding (ids `1..=|V|`).
    pub fn score_full(&self, h_last: &[f64]) -> PredictionScores {
        let table = &self.item_embedding.value;
        let values = (1..=self.num_items)
            .map(|i| dot(h_last, table.row(i)))
            .collect();
        PredictionScores::new(values, ScoreSpace::Logit)
    }

    pub fn score_sequence(
        &self,
        items: &[usize],
        hooks: &mut EncodeHooks<'_>,
    ) -> Result<PredictionScores> {
        let h = self.final_hidden(items, hooks)?;
        Ok(self.score_full(&h))
    }

    /// Copy of this model whose catalog is extended to `num_items` with
    /// freshly initialised rows for the new items. Used to measure how
    /// inference cost scales with catalog size.
    pub fn with_catalog_size<R: Rng + ?Sized>(&self, num_items: usize, rng: &mut R) -> Result<Self> {
        if num_items < self.num_items {
            return Err(Error::config(format!(
                "catalog can only grow ({} -> {num_items})",
                self.num_items
            )));
        }
        let d = self.dim();
        let old = &self.item_embedding.value;
        let mut table = Matrix::zeros(num_items + 2, d);
        for r in 0..=self.num_items {
            table.row_mut(r).copy_from_slice(old.row(r));
        }
        let scale = old.max_abs().max(1e-3);
        for r in self.num_items + 1..=num_items {
            for c in 0..d {
                table.set(r, c, rng.gen_range(-scale..scale));
            }
        }
        table.row_mut(num_items + 1).copy_from_slice(old.row(self.num_items + 1));
        let mut out = self.clone();
        out.num_items = num_items;
        out.item_embedding = Parameter::new(table);
        Ok(out)
    }
}
