//! Single-layer GRU with backpropagation through time.
//!
//! Gate layout in the fused weight matrices is `[reset | update | candidate]`:
//!
//! ```text
//! r = σ(x·Wi_r + bi_r + h·Wh_r + bh_r)
//! z = σ(x·Wi_z + bi_z + h·Wh_z + bh_z)
//! n = tanh(x·Wi_n + bi_n + r ⊙ (h·Wh_n + bh_n))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::debug_check_finite;
use super::{Matrix, Parameter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruLayer {
    pub input_weight: Parameter,
    pub hidden_weight: Parameter,
    pub input_bias: Parameter,
    pub hidden_bias: Parameter,
}

#[derive(Debug, Clone)]
struct Step {
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    gh_n: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    x: Matrix,
    steps: Vec<Step>,
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// `out += v · M` for a row vector `v`.
fn vec_matmul_into(v: &[f64], m: &Matrix, out: &mut [f64]) {
    for (k, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, b) in out.iter_mut().zip(m.row(k)) {
            *o += a * b;
        }
    }
}

/// `g += uᵀ · v`
fn outer_accumulate(g: &mut Matrix, u: &[f64], v: &[f64]) {
    for (i, &a) in u.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for (o, b) in g.row_mut(i).iter_mut().zip(v) {
            *o += a * b;
        }
    }
}

impl GruLayer {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            input_weight: Parameter::new(Matrix::xavier(input, 3 * hidden, rng)),
            hidden_weight: Parameter::new(Matrix::xavier(hidden, 3 * hidden, rng)),
            input_bias: Parameter::zeros(1, 3 * hidden),
            hidden_bias: Parameter::zeros(1, 3 * hidden),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_weight.value.rows()
    }

    /// Runs the recurrence left to right from a zero initial state and
    /// returns every hidden state as a row.
    pub fn forward(&self, x: &Matrix) -> (Matrix, GruCache) {
        let d = self.hidden_dim();
        let len = x.rows();
        let mut hs = Matrix::zeros(len, d);
        let mut steps = Vec::with_capacity(len);
        let mut h = vec![0.0; d];
        let bi = self.input_bias.value.data();
        let bh = self.hidden_bias.value.data();
        for t in 0..len {
            let mut gi = bi.to_vec();
            vec_matmul_into(x.row(t), &self.input_weight.value, &mut gi);
            let mut gh = bh.to_vec();
            vec_matmul_into(&h, &self.hidden_weight.value, &mut gh);
            let mut r = vec![0.0; d];
            let mut z = vec![0.0; d];
            let mut n = vec![0.0; d];
            let mut h_new = vec![0.0; d];
            for c in 0..d {
                r[c] = sigmoid(gi[c] + gh[c]);
                z[c] = sigmoid(gi[d + c] + gh[d + c]);
                n[c] = (gi[2 * d + c] + r[c] * gh[2 * d + c]).tanh();
                h_new[c] = (1.0 - z[c]) * n[c] + z[c] * h[c];
            }
            hs.row_mut(t).copy_from_slice(&h_new);
            steps.push(Step {
                h_prev: std::mem::replace(&mut h, h_new),
                r,
                z,
                n,
                gh_n: gh[2 * d..].to_vec(),
            });
        }
        debug_check_finite(&hs, "gru");
        (
            hs,
            GruCache {
                x: x.clone(),
                steps,
            },
        )
    }

    pub fn backward(&mut self, cache: &GruCache, dh_out: &Matrix) -> Matrix {
        let d = self.hidden_dim();
        let len = cache.x.rows();
        let mut dx = Matrix::zeros(len, cache.x.cols());
        let mut carry = vec![0.0; d];
        for t in (0..len).rev() {
            let s = &cache.steps[t];
            let dh: Vec<f64> = dh_out.row(t).iter().zip(&carry).map(|(a, b)| a + b).collect();
            let mut dgi = vec![0.0; 3 * d];
            let mut dgh = vec![0.0; 3 * d];
            let mut dh_prev = vec![0.0; d];
            for c in 0..d {
                let dn = dh[c] * (1.0 - s.z[c]);
                let dz = dh[c] * (s.h_prev[c] - s.n[c]);
                dh_prev[c] = dh[c] * s.z[c];
                let dn_pre = dn * (1.0 - s.n[c] * s.n[c]);
                let dr = dn_pre * s.gh_n[c];
                let dr_pre = dr * s.r[c] * (1.0 - s.r[c]);
                let dz_pre = dz * s.z[c] * (1.0 - s.z[c]);
                dgi[c] = dr_pre;
                dgi[d + c] = dz_pre;
                dgi[2 * d + c] = dn_pre;
                dgh[c] = dr_pre;
                dgh[d + c] = dz_pre;
                dgh[2 * d + c] = dn_pre * s.r[c];
            }
            outer_accumulate(&mut self.input_weight.grad, cache.x.row(t), &dgi);
            outer_accumulate(&mut self.hidden_weight.grad, &s.h_prev, &dgh);
            for (g, v) in self.input_bias.grad.data_mut().iter_mut().zip(&dgi) {
                *g += v;
            }
            for (g, v) in self.hidden_bias.grad.data_mut().iter_mut().zip(&dgh) {
                *g += v;
            }
            let dxr = dx.row_mut(t);
            for (i, o) in dxr.iter_mut().enumerate() {
                *o = super::dot(self.input_weight.value.row(i), &dgi);
            }
            for (i, o) in dh_prev.iter_mut().enumerate() {
                *o += super::dot(self.hidden_weight.value.row(i), &dgh);
            }
            carry = dh_prev;
        }
        dx
    }

    pub fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Parameter)) {
        f(&format!("{prefix}.input_weight"), &mut self.input_weight);
        f(&format!("{prefix}.hidden_weight"), &mut self.hidden_weight);
        f(&format!("{prefix}.input_bias"), &mut self.input_bias);
        f(&format!("{prefix}.hidden_bias"), &mut self.hidden_bias);
    }
}
