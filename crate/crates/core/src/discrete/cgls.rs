use num_complex::Complex64;
use serde::Serialize;

use super::operator::ForwardOperator;
use crate::error::{GeoError, Result};

#[derive(Clone, Debug, Serialize)]
pub struct CglsOutcome {
    #[serde(skip)]
    pub x: Vec<Complex64>,
    /// `‖b − A xₖ‖` for `k = 0, 1, …`.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

fn finite(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Conjugate gradients on the normal equations `AᴴA x = Aᴴ b`, from `x₀ = 0`.
/// Stops when `‖r‖ ≤ tol·‖b‖` or `‖Aᴴr‖ ≤ tol·‖Aᴴb‖`, or after `max_iters`.
pub fn cgls(op: &ForwardOperator, data: &[Complex64], max_iters: usize, tol: f64) -> Result<CglsOutcome> {
    if data.len() != op.rows() {
        return Err(GeoError::SizeMismatch {
            expected: op.rows(),
            found: data.len(),
        });
    }
    let mut x = vec![Complex64::new(0.0, 0.0); op.cols()];
    let mut r = data.to_vec();
    let b_norm = norm2(&r).sqrt();
    let mut history = vec![b_norm];
    if b_norm == 0.0 {
        return Ok(CglsOutcome {
            x,
            history,
            iterations: 0,
            converged: true,
        });
    }
    let mut s = op.apply_adjoint(&r)?;
    let mut p = s.clone();
    let mut gamma = norm2(&s);
    let s0 = gamma.sqrt();
    for k in 0..max_iters {
        let q = op.apply(&p)?;
        let qq = norm2(&q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi += pi * alpha;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= qi * alpha;
        }
        s = op.apply_adjoint(&r)?;
        let gamma_new = norm2(&s);
        let res = norm2(&r).sqrt();
        if !finite(&x) || !res.is_finite() || !gamma_new.is_finite() {
            return Err(GeoError::Numeric(format!(
                "CGLS produced non-finite iterate at step {} (last residual {:e})",
                k + 1,
                history.last().copied().unwrap_or(f64::NAN)
            )));
        }
        history.push(res);
        if res <= tol * b_norm || gamma_new.sqrt() <= tol * s0 {
            return Ok(CglsOutcome {
                x,
                history,
                iterations: k + 1,
                converged: true,
            });
        }
        let beta = gamma_new / gamma;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + *pi * beta;
        }
        gamma = gamma_new;
    }
    let iterations = history.len() - 1;
    Ok(CglsOutcome {
        x,
        history,
        iterations,
        converged: false,
    })
}

pub fn relative_error(x: &[Complex64], truth: &[Complex64]) -> f64 {
    let diff: f64 = x.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    let t = norm2(truth);
    if t == 0.0 {
        diff.sqrt()
    } else {
        (diff / t).sqrt()
    }
}
