//! Dense layers with hand-written backward passes: item embedding lookup,
//! affine maps, layer normalisation and the position-wise feed-forward net.
//!
//! Every `backward` accumulates into the owning [`Parameter::grad`] and
//! returns the gradient with respect to the layer input.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::debug_check_finite;
use super::{Matrix, Parameter};
use crate::error::{Error, Result};

/// Gathers rows of `table` for `ids`.
pub fn embedding_forward(table: &Matrix, ids: &[usize]) -> Result<Matrix> {
    let d = table.cols();
    let mut out = Matrix::zeros(ids.len(), d);
    for (r, &id) in ids.iter().enumerate() {
        if id >= table.rows() {
            return Err(Error::Index {
                what: "embedding table",
                index: id,
                size: table.rows(),
            });
        }
        out.row_mut(r).copy_from_slice(table.row(id));
    }
    Ok(out)
}

/// Scatter-adds `upstream` rows into `table_grad`. Row 0 is the padding row
/// and never receives gradient.
pub fn embedding_backward(table_grad: &mut Matrix, ids: &[usize], upstream: &Matrix) {
    assert_eq!(ids.len(), upstream.rows());
    for (r, &id) in ids.iter().enumerate() {
        if id == 0 {
            continue;
        }
        for (g, u) in table_grad.row_mut(id).iter_mut().zip(upstream.row(r)) {
            *g += u;
        }
    }
}

/// `y = x·W + b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: Parameter::new(Matrix::xavier(input, output, rng)),
            bias: Parameter::zeros(1, output),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = x.matmul(&self.weight.value);
        y.add_row_broadcast(&self.bias.value);
        debug_check_finite(&y, "linear");
        y
    }

    pub fn backward(&mut self, x: &Matrix, dy: &Matrix) -> Matrix {
        self.weight.grad.add_assign(&x.t_matmul(dy));
        self.bias.grad.add_assign(&dy.sum_rows());
        dy.matmul_t(&self.weight.value)
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter)) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

/// Row-wise layer normalisation with learned gain and shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNorm {
    pub gamma: Parameter,
    pub beta: Parameter,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    xhat: Matrix,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        let mut gamma = Matrix::zeros(1, dim);
        gamma.fill(1.0);
        Self {
            gamma: Parameter::new(gamma),
            beta: Parameter::zeros(1, dim),
            eps: 1e-8,
        }
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, LayerNormCache) {
        let (rows, cols) = x.shape();
        let mut xhat = Matrix::zeros(rows, cols);
        let mut y = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / (var + self.eps).sqrt();
            inv_std.push(inv);
            let xh = xhat.row_mut(r);
            for c in 0..cols {
                xh[c] = (row[c] - mean) * inv;
            }
            let yr = y.row_mut(r);
            for c in 0..cols {
                yr[c] = gamma[c] * xhat.get(r, c) + beta[c];
            }
        }
        debug_check_finite(&y, "layer norm");
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&mut self, cache: &LayerNormCache, dy: &Matrix) -> Matrix {
        let (rows, cols) = dy.shape();
        let n = cols as f64;
        let mut dx = Matrix::zeros(rows, cols);
        let gamma = self.gamma.value.data().to_vec();
        for r in 0..rows {
            let dyr = dy.row(r);
            let xh = cache.xhat.row(r);
            {
                let dg = self.gamma.grad.data_mut();
                for c in 0..cols {
                    dg[c] += dyr[c] * xh[c];
                }
            }
            {
                let db = self.beta.grad.data_mut();
                for c in 0..cols {
                    db[c] += dyr[c];
                }
            }
            let dxhat: Vec<f64> = (0..cols).map(|c| dyr[c] * gamma[c]).collect();
            let sum_dxhat: f64 = dxhat.iter().sum();
            let sum_dxhat_xhat: f64 = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum();
            let inv = cache.inv_std[r];
            let out = dx.row_mut(r);
            for c in 0..cols {
                out[c] = inv / n * (n * dxhat[c] - sum_dxhat - xh[c] * sum_dxhat_xhat);
            }
        }
        dx
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter)) {
        f(&format!("{prefix}.gamma"), &mut self.gamma);
        f(&format!("{prefix}.beta"), &mut self.beta);
    }
}

/// Position-wise `Linear → ReLU → Linear`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

#[derive(Debug, Clone)]
pub struct FeedForwardCache {
    x: Matrix,
    pre: Matrix,
    act: Matrix,
}

impl FeedForward {
    pub fn new<R: Rng + ?Sized>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            inner: Linear::new(dim, hidden, rng),
            outer: Linear::new(hidden, dim, rng),
        }
    }

    pub fn forward(&self, x: &Matrix) -> (Matrix, FeedForwardCache) {
        let pre = self.inner.forward(x);
        let mut act = pre.clone();
        act.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        let y = self.outer.forward(&act);
        (
            y,
            FeedForwardCache {
                x: x.clone(),
                pre,
                act,
            },
        )
    }

    pub fn backward(&mut self, cache: &FeedForwardCache, dy: &Matrix) -> Matrix {
        let mut dact = self.outer.backward(&cache.act, dy);
        for (g, p) in dact.data_mut().iter_mut().zip(cache.pre.data()) {
            if *p <= 0.0 {
                *g = 0.0;
            }
        }
        self.inner.backward(&cache.x, &dact)
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter)) {
        self.inner.visit_params(&format!("{prefix}.inner"), f);
        self.outer.visit_params(&format!("{prefix}.outer"), f);
    }
}
