//! Central finite-difference verification of analytic gradients.

use serde::Serialize;

use super::{Matrix, Parameter};

/// A deterministic computation with named trainable tensors.
pub trait Fragment {
    fn visit_params(&mut self, f: &mut dyn FnMut(&str, &mut Parameter));

    /// Scalar objective evaluated with the current parameter values.
    fn loss(&self) -> f64;

    /// Accumulates `∂loss/∂param` into every parameter's `grad`. Grads are
    /// zeroed by the harness before the call.
    fn backward(&mut self);
}

#[derive(Debug, Clone, Serialize)]
pub struct TensorCheck {
    pub name: String,
    /// `max|analytic − numeric| / max(max|analytic|, max|numeric|, SCALE_FLOOR)`
    /// over the tensor.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub step: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.tensors
            .iter()
            .filter(|t| !t.passed)
            .map(|t| t.name.as_str())
            .collect()
    }

    pub fn worst(&self) -> f64 {
        self.tensors
            .iter()
            .map(|t| t.max_rel_error)
            .fold(0.0, f64::max)
    }
}

/// Tensors whose true gradient vanishes (e.g. a key bias under softmax shift
/// invariance) fall back to an absolute comparison against this scale.
pub const SCALE_FLOOR: f64 = 1e-6;

fn with_param<F: Fragment + ?Sized>(frag: &mut F, idx: usize, op: &mut dyn FnMut(&mut Parameter)) {
    let mut i = 0;
    frag.visit_params(&mut |_, p| {
        if i == idx {
            op(p);
        }
        i += 1;
    });
}

/// Compares analytic gradients against central differences with step `h`.
pub fn finite_difference_check<F: Fragment + ?Sized>(
    frag: &mut F,
    h: f64,
    tolerance: f64,
) -> GradCheckReport {
    let mut names = Vec::new();
    frag.visit_params(&mut |name, p| {
        p.zero_grad();
        names.push(name.to_string());
    });
    frag.backward();
    let mut analytic: Vec<Matrix> = Vec::new();
    frag.visit_params(&mut |_, p| analytic.push(p.grad.clone()));

    let mut tensors = Vec::with_capacity(names.len());
    for (idx, name) in names.into_iter().enumerate() {
        let a = &analytic[idx];
        let mut numeric = Matrix::zeros(a.rows(), a.cols());
        for e in 0..a.data().len() {
            let mut orig = 0.0;
            with_param(frag, idx, &mut |p| {
                orig = p.value.data()[e];
                p.value.data_mut()[e] = orig + h;
            });
            let plus = frag.loss();
            with_param(frag, idx, &mut |p| p.value.data_mut()[e] = orig - h);
            let minus = frag.loss();
            with_param(frag, idx, &mut |p| p.value.data_mut()[e] = orig);
            numeric.data_mut()[e] = (plus - minus) / (2.0 * h);
        }
        let max_abs_error = a
            .data()
            .iter()
            .zip(numeric.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let scale = a.max_abs().max(numeric.max_abs()).max(SCALE_FLOOR);
        let max_rel_error = max_abs_error / scale;
        tensors.push(TensorCheck {
            name,
            max_rel_error,
            max_abs_error,
            passed: max_rel_error < tolerance,
        });
    }
    GradCheckReport {
        tolerance,
        step: h,
        tensors,
    }
}
