//! Causal multi-head self-attention and the post-norm transformer block.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{FeedForward, FeedForwardCache, LayerNorm, LayerNormCache, Linear};
use super::matrix::debug_check_finite;
use super::{Matrix, Parameter};
use crate::error::{Error, Result};

/// Whether query `i` may attend to key `j`. A position always sees itself,
/// so no row is ever fully masked.
#[inline]
fn allowed(i: usize, j: usize, key_padding: Option<&[bool]>) -> bool {
    if j > i {
        return false;
    }
    if j == i {
        return true;
    }
    !key_padding.is_some_and(|p| p[j])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// One `L × L` probability matrix per head.
    probs: Vec<Matrix>,
    context: Matrix,
}

impl AttentionCache {
    /// Concatenated per-head attention outputs, before the output projection.
    pub fn context(&self) -> &Matrix {
        &self.context
    }

    pub fn probs(&self, head: usize) -> &Matrix {
        &self.probs[head]
    }
}

impl SelfAttention {
    pub fn new<R: Rng + ?Sized>(dim: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || dim % heads != 0 {
            return Err(Error::config(format!(
                "embedding dimension {dim} is not divisible by {heads} heads"
            )));
        }
        Ok(Self {
            query: Linear::new(dim, dim, rng),
            key: Linear::new(dim, dim, rng),
            value: Linear::new(dim, dim, rng),
            output: Linear::new(dim, dim, rng),
            heads,
        })
    }

    fn head_dim(&self) -> usize {
        self.query.weight.value.cols() / self.heads
    }

    pub fn forward(&self, x: &Matrix, key_padding: Option<&[bool]>) -> (Matrix, AttentionCache) {
        let len = x.rows();
        if let Some(p) = key_padding {
            assert_eq!(p.len(), len, "key padding mask length");
        }
        let q = self.query.forward(x);
        let k = self.key.forward(x);
        let v = self.value.forward(x);
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let mut context = Matrix::zeros(len, dh * self.heads);
        let mut probs = Vec::with_capacity(self.heads);

        for h in 0..self.heads {
            let off = h * dh;
            let mut p = Matrix::zeros(len, len);
            for i in 0..len {
                let qi = &q.row(i)[off..off + dh];
                let mut max = f64::NEG_INFINITY;
                for j in 0..=i {
                    if allowed(i, j, key_padding) {
                        let kj = &k.row(j)[off..off + dh];
                        let s = super::dot(qi, kj) * scale;
                        p.set(i, j, s);
                        max = max.max(s);
                    }
                }
                let mut sum = 0.0;
                for j in 0..=i {
                    if allowed(i, j, key_padding) {
                        let e = (p.get(i, j) - max).exp();
                        p.set(i, j, e);
                        sum += e;
                    }
                }
                for j in 0..=i {
                    if allowed(i, j, key_padding) {
                        p.set(i, j, p.get(i, j) / sum);
                    }
                }
                let ctx = context.row_mut(i);
                for j in 0..=i {
                    let w = p.get(i, j);
                    if w == 0.0 {
                        continue;
                    }
                    let vj = &v.row(j)[off..off + dh];
                    for (c, vv) in ctx[off..off + dh].iter_mut().zip(vj) {
                        *c += w * vv;
                    }
                }
            }
            probs.push(p);
        }
        let out = self.output.forward(&context);
        debug_check_finite(&out, "self-attention");
        (
            out,
            AttentionCache {
                x: x.clone(),
                q,
                k,
                v,
                probs,
                context,
            },
        )
    }

    pub fn backward(&mut self, cache: &AttentionCache, dy: &Matrix) -> Matrix {
        let len = cache.x.rows();
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let dcontext = self.output.backward(&cache.context, dy);
        let width = dh * self.heads;
        let mut dq = Matrix::zeros(len, width);
        let mut dk = Matrix::zeros(len, width);
        let mut dv = Matrix::zeros(len, width);

        for h in 0..self.heads {
            let off = h * dh;
            let p = &cache.probs[h];
            for i in 0..len {
                let dci = &dcontext.row(i)[off..off + dh];
                // dP[i][j] = dC_i · V_j ; dV_j += P[i][j] dC_i
                let mut dp = vec![0.0; i + 1];
                for j in 0..=i {
                    let w = p.get(i, j);
                    if w == 0.0 {
                        continue;
                    }
                    let vj = &cache.v.row(j)[off..off + dh];
                    dp[j] = super::dot(dci, vj);
                    let dvj = &mut dv.row_mut(j)[off..off + dh];
                    for (g, c) in dvj.iter_mut().zip(dci) {
                        *g += w * c;
                    }
                }
                let inner: f64 = (0..=i).map(|j| dp[j] * p.get(i, j)).sum();
                let qi = cache.q.row(i)[off..off + dh].to_vec();
                for j in 0..=i {
                    let w = p.get(i, j);
                    if w == 0.0 {
                        continue;
                    }
                    let ds = w * (dp[j] - inner) * scale;
                    let kj = cache.k.row(j)[off..off + dh].to_vec();
                    for (g, kv) in dq.row_mut(i)[off..off + dh].iter_mut().zip(&kj) {
                        *g += ds * kv;
                    }
                    for (g, qv) in dk.row_mut(j)[off..off + dh].iter_mut().zip(&qi) {
                        *g += ds * qv;
                    }
                }
            }
        }
        let mut dx = self.query.backward(&cache.x, &dq);
        dx.add_assign(&self.key.backward(&cache.x, &dk));
        dx.add_assign(&self.value.backward(&cache.x, &dv));
        dx
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.query.visit_params(&format!("{prefix}.query"), f);
        self.key.visit_params(&format!("{prefix}.key"), f);
        self.value.visit_params(&format!("{prefix}.value"), f);
        self.output.visit_params(&format!("{prefix}.output"), f);
    }
}

/// `x → LN(x + Attn(x)) → LN(· + FFN(·))`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerBlock {
    pub attention: SelfAttention,
    pub attn_norm: LayerNorm,
    pub ffn: FeedForward,
    pub ffn_norm: LayerNorm,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    attention: AttentionCache,
    attn_norm: LayerNormCache,
    ffn: FeedForwardCache,
    ffn_norm: LayerNormCache,
}

impl TransformerBlock {
    pub fn new<R: Rng + ?Sized>(dim: usize, heads: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            attention: SelfAttention::new(dim, heads, rng)?,
            attn_norm: LayerNorm::new(dim),
            ffn: FeedForward::new(dim, dim, rng),
            ffn_norm: LayerNorm::new(dim),
        })
    }

    pub fn forward(&self, x: &Matrix, key_padding: Option<&[bool]>) -> (Matrix, BlockCache) {
        let (a, attention) = self.attention.forward(x, key_padding);
        let mut r1 = x.clone();
        r1.add_assign(&a);
        let (y1, attn_norm) = self.attn_norm.forward(&r1);
        let (f, ffn) = self.ffn.forward(&y1);
        let mut r2 = y1;
        r2.add_assign(&f);
        let (y2, ffn_norm) = self.ffn_norm.forward(&r2);
        (
            y2,
            BlockCache {
                attention,
                attn_norm,
                ffn,
                ffn_norm,
            },
        )
    }

    pub fn backward(&mut self, cache: &BlockCache, dy: &Matrix) -> Matrix {
        let dr2 = self.ffn_norm.backward(&cache.ffn_norm, dy);
        let mut dy1 = self.ffn.backward(&cache.ffn, &dr2);
        dy1.add_assign(&dr2);
        let dr1 = self.attn_norm.backward(&cache.attn_norm, &dy1);
        let mut dx = self.attention.backward(&cache.attention, &dr1);
        dx.add_assign(&dr1);
        dx
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.attention.visit_params(&format!("{prefix}.attention"), f);
        self.attn_norm.visit_params(&format!("{prefix}.attn_norm"), f);
        self.ffn.visit_params(&format!("{prefix}.ffn"), f);
        self.ffn_norm.visit_params(&format!("{prefix}.ffn_norm"), f);
    }
}
