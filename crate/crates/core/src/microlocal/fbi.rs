use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::distribution::TestDistribution;
use super::packet::{packet_constant, PhaseSpacePoint};
use crate::error::{GeoError, Result};

/// Magnitudes below this are floored before taking logarithms.
pub const MAGNITUDE_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FbiResponse {
    pub lambda_grid: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub dim: usize,
    /// `c_m`.
    pub constant: f64,
    /// Exponent `3m/4` of the `λ` normalization.
    pub power: f64,
}

impl FbiResponse {
    /// Wraps externally computed magnitudes, e.g. synthetic decay laws.
    pub fn from_samples(dim: usize, lambda_grid: Vec<f64>, magnitudes: Vec<f64>) -> Result<Self> {
        check_grid(&lambda_grid)?;
        if magnitudes.len() != lambda_grid.len() {
            return Err(GeoError::SizeMismatch {
                expected: lambda_grid.len(),
                found: magnitudes.len(),
            });
        }
        if magnitudes.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(GeoError::InvalidArgument("magnitudes must be finite and non-negative".into()));
        }
        Ok(FbiResponse {
            lambda_grid,
            magnitudes,
            dim,
            constant: packet_constant(dim),
            power: 0.75 * dim as f64,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("lambda,magnitude\n");
        for (l, m) in self.lambda_grid.iter().zip(&self.magnitudes) {
            let _ = writeln!(s, "{l},{m}");
        }
        s
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GeoError::InvalidArgument("λ grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// `n` geometrically spaced values from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(lo > 0.0) || !(hi > lo) {
        return Err(GeoError::InvalidArgument(format!("geometric grid needs 0 < {lo} < {hi} and n ≥ 2")));
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    let mut g: Vec<f64> = (0..n).map(|k| lo * (r * k as f64).exp()).collect();
    g[n - 1] = hi;
    Ok(g)
}

/// 16 points from 20 to 400.
pub fn default_lambda_grid() -> Vec<f64> {
    geometric_grid(20.0, 400.0, 16).expect("valid constants")
}

/// `|L^λ f(u)|` over `lambda_grid`, evaluated in parallel.
pub fn fbi(f: &TestDistribution, u: &PhaseSpacePoint, lambda_grid: &[f64]) -> Result<FbiResponse> {
    check_grid(lambda_grid)?;
    let magnitudes = lambda_grid
        .par_iter()
        .map(|&l| f.pairing(u, l).map(|v| v.norm()))
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = magnitudes.iter().position(|m| !m.is_finite()) {
        return Err(GeoError::Numeric(format!("FBI magnitude non-finite at λ = {}", lambda_grid[bad])));
    }
    FbiResponse::from_samples(u.dim(), lambda_grid.to_vec(), magnitudes)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub epsilon: f64,
    pub r2: f64,
    /// Some magnitudes in the fitted range were floored.
    pub floored: bool,
    pub points: usize,
}

/// Fits `log|L^λ f| ≈ a + b·log λ − ε·λ` over the upper half of the grid.
/// The `log λ` column absorbs the `λ^{3m/4}` normalization and any power
/// law, so `ε` isolates the exponential rate.
pub fn decay_fit(resp: &FbiResponse) -> Result<DecayFit> {
    let n = resp.lambda_grid.len();
    if n < 8 {
        return Err(GeoError::InvalidArgument(format!("decay fit needs ≥ 8 grid points, got {n}")));
    }
    let span = resp.lambda_grid[n - 1] / resp.lambda_grid[0];
    if span < 8.0 {
        return Err(GeoError::InvalidArgument(format!("λ grid spans a factor {span:.3} < 8")));
    }
    let lo = n / 2;
    let k = n - lo;
    let scale = resp.lambda_grid[n - 1];
    let mut floored = false;
    let y: Vec<f64> = resp.magnitudes[lo..]
        .iter()
        .map(|&m| {
            if m < MAGNITUDE_FLOOR {
                floored = true;
            }
            m.max(MAGNITUDE_FLOOR).ln()
        })
        .collect();
    let x = DMatrix::from_fn(k, 3, |i, j| {
        let l = resp.lambda_grid[lo + i];
        match j {
            0 => 1.0,
            1 => (l / scale).ln(),
            _ => l / scale,
        }
    });
    let yv = DVector::from_vec(y.clone());
    let coef = x
        .clone()
        .svd(true, true)
        .solve(&yv, 1e-14)
        .map_err(|e| GeoError::Numeric(format!("decay fit: {e}")))?;
    let fitted = &x * &coef;
    let mean = y.iter().sum::<f64>() / k as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    let r2 = if ss_tot <= 1e-24 * (1.0 + mean * mean) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    let mut epsilon = -coef[2] / scale;
    if epsilon.abs() < 1e-12 {
        epsilon = 0.0;
    }
    Ok(DecayFit {
        epsilon,
        r2,
        floored,
        points: k,
    })
}
