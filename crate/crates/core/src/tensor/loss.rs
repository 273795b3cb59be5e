use super::Matrix;
use crate::error::{Error, Result};

/// Numerically stable softmax of one row.
pub fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Mean full-vocabulary cross-entropy over the unmasked rows of `scores`.
///
/// Column `c` of `scores` is item id `c + 1`; `targets[r]` is an item id.
/// `active[r] == false` excludes row `r`. Returns the loss and `∂loss/∂scores`.
pub fn softmax_cross_entropy(
    scores: &Matrix,
    targets: &[usize],
    active: &[bool],
) -> Result<(f64, Matrix)> {
    let (rows, cols) = scores.shape();
    assert_eq!(targets.len(), rows);
    assert_eq!(active.len(), rows);
    let count = active.iter().filter(|&&a| a).count();
    if count == 0 {
        return Err(Error::config("cross-entropy over zero unmasked positions"));
    }
    let inv = 1.0 / count as f64;
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(rows, cols);
    for r in 0..rows {
        if !active[r] {
            continue;
        }
        let t = targets[r];
        if t == 0 || t > cols {
            return Err(Error::Index {
                what: "cross-entropy target",
                index: t,
                size: cols,
            });
        }
        let row = scores.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - row[t - 1];
        let g = grad.row_mut(r);
        for (c, v) in row.iter().enumerate() {
            g[c] = (v - log_z).exp() * inv;
        }
        g[t - 1] -= inv;
    }
    Ok((loss * inv, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores_give_log_vocab() {
        let scores = Matrix::zeros(3, 4);
        let (loss, _) = softmax_cross_entropy(&scores, &[1, 2, 4], &[true; 3]).unwrap();
        assert!((loss - 4.0_f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn saturated_target_gives_vanishing_loss() {
        let scores = Matrix::from_rows(&[vec![0.0, 60.0, 0.0]]);
        let (loss, grad) = softmax_cross_entropy(&scores, &[2], &[true]).unwrap();
        assert!(loss < 1e-20);
        assert!(grad.max_abs() < 1e-20);
    }

    #[test]
    fn masked_rows_are_excluded() {
        let scores = Matrix::from_rows(&[vec![1.0, 2.0], vec![5.0, -5.0]]);
        let (loss, grad) = softmax_cross_entropy(&scores, &[1, 1], &[false, true]).unwrap();
        let (single, _) =
            softmax_cross_entropy(&scores.slice_rows(1, 2), &[1], &[true]).unwrap();
        assert_eq!(loss, single);
        assert!(grad.row(0).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn no_active_rows_is_a_configuration_error() {
        let scores = Matrix::zeros(2, 3);
        assert!(matches!(
            softmax_cross_entropy(&scores, &[1, 1], &[false, false]),
            Err(Error::Config(_))
        ));
    }
}
