use serde::{Deserialize, Serialize};

use super::Matrix;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// A trainable tensor with its gradient and Adam moment accumulators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
    pub m1: Matrix,
    pub m2: Matrix,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Matrix::zeros(r, c),
            m1: Matrix::zeros(r, c),
            m2: Matrix::zeros(r, c),
            step_count: 0,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    /// One bias-corrected Adam update. Clears the gradient afterwards.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let value = self.value.data_mut();
        let grad = self.grad.data();
        let m1 = self.m1.data_mut();
        let m2 = self.m2.data_mut();
        for i in 0..value.len() {
            let g = grad[i];
            m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g;
            m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m1[i] / bc1;
            let v_hat = m2[i] / bc2;
            value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        self.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_value_unchanged() {
        let mut p = Parameter::new(Matrix::from_rows(&[vec![1.5, -2.0]]));
        p.adam_step(&AdamConfig::default());
        assert_eq!(p.value.data(), &[1.5, -2.0]);
        assert_eq!(p.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let cfg = AdamConfig::default();
        let mut p = Parameter::new(Matrix::from_rows(&[vec![0.0, 0.0, 0.0]]));
        p.grad = Matrix::from_rows(&[vec![3.0, -0.25, 1e-3]]);
        p.adam_step(&cfg);
        for (v, g) in p.value.data().iter().zip([3.0_f64, -0.25, 1e-3]) {
            // m_hat = g, v_hat = g², so the step is lr·g/(|g| + eps).
            let expected = -cfg.lr * g / (g.abs() + cfg.eps);
            assert!((v - expected).abs() < 1e-15);
            assert!((v.abs() - cfg.lr).abs() < 1e-7);
        }
        assert!(p.grad.data().iter().all(|&g| g == 0.0));
        assert!(p.m2.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn minimises_scalar_quadratic() {
        // f(x) = x², f'(x) = 2x
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        let mut p = Parameter::new(Matrix::from_rows(&[vec![1.0]]));
        for _ in 0..100 {
            let x = p.value.get(0, 0);
            p.grad.set(0, 0, 2.0 * x);
            p.adam_step(&cfg);
        }
        assert!(p.value.get(0, 0).abs() < 0.05, "x = {}", p.value.get(0, 0));
    }
}
