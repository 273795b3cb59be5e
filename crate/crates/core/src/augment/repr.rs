use rand::distributions::{Distribution, Uniform};
use rand::Rng;

use super::select::operated_count;
use crate::tensor::Matrix;

fn real_rows(rows: usize, padding: Option<&[bool]>) -> Vec<usize> {
    match padding {
        None => (0..rows).collect(),
        Some(p) => (0..rows).filter(|&r| !p[r]).collect(),
    }
}

/// Adds i.i.d. `Uniform[lo, hi]` noise to every entry of the non-padding rows.
pub fn tnoise<R: Rng + ?Sized>(
    rep: &Matrix,
    lo: f64,
    hi: f64,
    padding: Option<&[bool]>,
    rng: &mut R,
) -> Matrix {
    assert!(lo <= hi, "noise interval [{lo}, {hi}]");
    let mut out = rep.clone();
    if lo == 0.0 && hi == 0.0 {
        return out;
    }
    let dist = Uniform::new_inclusive(lo, hi);
    for r in real_rows(rep.rows(), padding) {
        for v in out.row_mut(r) {
            *v += dist.sample(rng);
        }
    }
    out
}

/// Zeroes `max(1, ⌊σ·L⌋)` random non-padding rows, `L` being the number
/// of real rows. Returns the new matrix and the zeroed rows (ascending).
pub fn tmask_b<R: Rng + ?Sized>(
    rep: &Matrix,
    sigma: f64,
    padding: Option<&[bool]>,
    rng: &mut R,
) -> (Matrix, Vec<usize>) {
    let real = real_rows(rep.rows(), padding);
    let mut out = rep.clone();
    if real.is_empty() {
        return (out, Vec::new());
    }
    let count = operated_count(sigma, real.len());
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, real.len(), count)
        .into_iter()
        .map(|i| real[i])
        .collect();
    picked.sort_unstable();
    for &r in &picked {
        out.row_mut(r).fill(0.0);
    }
    (out, picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn ramp(rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|i| i as f64 * 0.1 + 1.0).collect())
    }

    #[test]
    fn zero_interval_is_identity() {
        let x = ramp(4, 3);
        assert_eq!(tnoise(&x, 0.0, 0.0, None, &mut seeded(0)), x);
    }

    #[test]
    fn noise_stays_in_interval_and_skips_padding() {
        let x = ramp(5, 4);
        let pad = [true, true, false, false, false];
        let y = tnoise(&x, 0.5, 1.0, Some(&pad), &mut seeded(9));
        for r in 0..5 {
            for c in 0..4 {
                let d = y.get(r, c) - x.get(r, c);
                if pad[r] {
                    assert_eq!(d, 0.0);
                } else {
                    assert!((0.5..=1.0).contains(&d), "{d}");
                }
            }
        }
    }

    #[test]
    fn tmask_b_counts() {
        let x = ramp(10, 2);
        let (y, rows) = tmask_b(&x, 0.2, None, &mut seeded(1));
        assert_eq!(rows.len(), 2);
        let zero_rows = (0..10).filter(|&r| y.row(r).iter().all(|&v| v == 0.0)).count();
        assert_eq!(zero_rows, 2);
        let (_, rows) = tmask_b(&x, 0.01, None, &mut seeded(1));
        assert_eq!(rows.len(), 1);
        let pad: Vec<bool> = (0..10).map(|r| r < 6).collect();
        let (_, rows) = tmask_b(&x, 0.5, Some(&pad), &mut seeded(2));
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|&r| r >= 6));
    }
}
