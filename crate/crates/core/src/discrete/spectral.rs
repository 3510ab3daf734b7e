//! Extremal singular values through the Gram matrix `AᴴA`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::operator::ForwardOperator;
use crate::error::{GeoError, Result};
use crate::transforms::CMat;

type CVec = DVector<Complex64>;

const LANCZOS_TOL: f64 = 1e-12;

/// Largest eigenvalue of a Hermitian positive semidefinite operator of size
/// `n` by Lanczos with full reorthogonalization. Deterministic start vector.
pub fn lanczos_max(n: usize, apply: impl Fn(&CVec) -> CVec, max_iters: usize) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut q = CVec::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    q /= Complex64::new(q.norm(), 0.0);
    let mut basis: Vec<CVec> = vec![q];
    let (mut alpha, mut beta) = (Vec::<f64>::new(), Vec::<f64>::new());
    let mut last = f64::NAN;
    let cap = max_iters.min(n).max(1);
    for k in 0..cap {
        let mut w = apply(&basis[k]);
        let a = basis[k].dotc(&w).re;
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&w);
                w -= b * proj;
            }
        }
        let t = tridiagonal(&alpha, &beta);
        let top = t.symmetric_eigenvalues().max();
        if !top.is_finite() {
            return Err(GeoError::Numeric("non-finite Ritz value".into()));
        }
        let b = w.norm();
        let settled = (top - last).abs() <= LANCZOS_TOL * top.abs().max(f64::MIN_POSITIVE);
        if b <= LANCZOS_TOL * top.abs().max(1.0) || (k >= 4 && settled) || k + 1 == n {
            return Ok(top);
        }
        last = top;
        beta.push(b);
        basis.push(w / Complex64::new(b, 0.0));
    }
    Err(GeoError::Convergence {
        iterations: cap,
        what: "Lanczos extremal eigenvalue".into(),
    })
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// `(σ_min, σ_max)` of a dense complex matrix given through its Gram
/// matrix. `σ_max²` is the top eigenvalue of `G`; `σ_min²` is the reciprocal
/// of the top eigenvalue of `G⁻¹`, applied through a Cholesky factor. When
/// `G` is not numerically positive definite `σ_min = 0`.
pub fn sigma_extremes_gram(gram: &CMat, underdetermined: bool) -> Result<(f64, f64)> {
    let n = gram.nrows();
    let max_iters = 400;
    let top = lanczos_max(n, |v| gram * v, max_iters)?;
    let sigma_max = top.max(0.0).sqrt();
    if underdetermined || sigma_max == 0.0 {
        return Ok((0.0, sigma_max));
    }
    let Some(chol) = gram.clone().cholesky() else {
        return Ok((0.0, sigma_max));
    };
    let inv_top = lanczos_max(n, |v| chol.solve(v), max_iters)?;
    let sigma_min = if inv_top.is_finite() && inv_top > 0.0 {
        (1.0 / inv_top).sqrt()
    } else {
        0.0
    };
    Ok((sigma_min, sigma_max))
}

/// Smallest and largest singular values of `op`. A system with fewer rows
/// than columns has `σ_min = 0`.
pub fn sigma_extremes(op: &ForwardOperator) -> Result<(f64, f64)> {
    sigma_extremes_gram(&op.gram(), op.rows() < op.cols())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_op(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ForwardOperator {
        let data = (0..rows * cols)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        ForwardOperator::from_dense(1, rows, cols, data).unwrap()
    }

    fn dense(op: &ForwardOperator) -> CMat {
        CMat::from_fn(op.rows(), op.cols(), |r, c| op.entry(r, c))
    }

    #[test]
    fn matches_full_svd_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..5 {
            let op = random_op(&mut rng, 20, 10);
            let sv = dense(&op).svd(false, false).singular_values;
            let (lo, hi) = sigma_extremes(&op).unwrap();
            assert!((hi - sv.max()).abs() <= 1e-8 * sv.max());
            assert!((lo - sv.min()).abs() <= 1e-8 * sv.max(), "{lo} vs {}", sv.min());
        }
    }

    #[test]
    fn scaled_identity_has_equal_extremes() {
        let n = 12;
        let data = (0..n * n)
            .map(|k| Complex64::new(if k % (n + 1) == 0 { 2.5 } else { 0.0 }, 0.0))
            .collect();
        let op = ForwardOperator::from_dense(1, n, n, data).unwrap();
        let (lo, hi) = sigma_extremes(&op).unwrap();
        assert!((lo - 2.5).abs() < 1e-12 && (hi - 2.5).abs() < 1e-12);
    }

    #[test]
    fn duplicated_rows_scale_by_sqrt_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let op = random_op(&mut rng, 15, 6);
        let (lo, hi) = sigma_extremes(&op).unwrap();
        let rows: Vec<usize> = (0..15).chain(0..15).collect();
        let all: Vec<usize> = (0..6).collect();
        let twice = op.select(&rows, &all);
        let (lo2, hi2) = sigma_extremes(&twice).unwrap();
        let r2 = std::f64::consts::SQRT_2;
        assert!((lo2 - r2 * lo).abs() < 1e-9 * hi && (hi2 - r2 * hi).abs() < 1e-9 * hi);
    }

    #[test]
    fn rank_deficiency_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let wide = random_op(&mut rng, 4, 8);
        assert_eq!(sigma_extremes(&wide).unwrap().0, 0.0);
        // a repeated column
        let op = random_op(&mut rng, 10, 4);
        let dup = op.select(&(0..10).collect::<Vec<_>>(), &[0, 1, 2, 3, 0]);
        let (lo, hi) = sigma_extremes(&dup).unwrap();
        assert!(lo < 1e-6 * hi);
    }
}
