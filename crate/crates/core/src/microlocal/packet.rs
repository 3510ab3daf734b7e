use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};

/// Phase-space point `u = (z, ζ)` in `ℝᵐ × (ℝᵐ \ 0)`, `m ∈ {1, 2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl PhaseSpacePoint {
    pub fn new(z: Vec<f64>, zeta: Vec<f64>) -> Result<Self> {
        if z.len() != zeta.len() {
            return Err(GeoError::SizeMismatch {
                expected: z.len(),
                found: zeta.len(),
            });
        }
        if !(1..=2).contains(&z.len()) {
            return Err(GeoError::InvalidArgument(format!("dimension {} not in {{1, 2}}", z.len())));
        }
        if z.iter().chain(&zeta).any(|v| !v.is_finite()) {
            return Err(GeoError::InvalidArgument("phase-space point must be finite".into()));
        }
        let p = PhaseSpacePoint { z, zeta };
        if p.zeta_norm() == 0.0 {
            return Err(GeoError::InvalidArgument("covector ζ must be nonzero".into()));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn zeta_norm(&self) -> f64 {
        self.zeta.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same base point with `ζ/|ζ|`.
    pub fn normalized(&self) -> Self {
        let n = self.zeta_norm();
        PhaseSpacePoint {
            z: self.z.clone(),
            zeta: self.zeta.iter().map(|v| v / n).collect(),
        }
    }
}

/// `c_m = 2^{−m/2} π^{−3m/4}`.
pub fn packet_constant(m: usize) -> f64 {
    let m = m as f64;
    2f64.powf(-m / 2.0) * PI.powf(-0.75 * m)
}

/// `λ^{3m/4} c_m`, the packet amplitude at its center.
pub fn packet_peak(m: usize, lambda: f64) -> f64 {
    lambda.powf(0.75 * m as f64) * packet_constant(m)
}

/// Gaussian wave packet `λ^{3m/4} c_m e^{iλ w·ζ} e^{−λ|w − z|²/2}`, for `λ > 0`.
pub fn wave_packet(u: &PhaseSpacePoint, lambda: f64, w: &[f64]) -> Complex64 {
    let m = u.dim();
    let phase: f64 = w.iter().zip(&u.zeta).map(|(a, b)| a * b).sum();
    let d2: f64 = w.iter().zip(&u.z).map(|(a, b)| (a - b) * (a - b)).sum();
    Complex64::from_polar(packet_peak(m, lambda) * (-lambda * d2 / 2.0).exp(), lambda * phase)
}
