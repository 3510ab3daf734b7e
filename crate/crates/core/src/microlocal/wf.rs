use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distribution::TestDistribution;
use super::fbi::{decay_fit, fbi, geometric_grid};
use super::packet::PhaseSpacePoint;
use crate::error::Result;

/// Classification thresholds, recorded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WfSetup {
    /// The λ grid runs geometrically over 16 points from `lambda_max/20`.
    pub lambda_max: f64,
    pub epsilon_threshold: f64,
    pub min_r2: f64,
    /// Radius of the 5×5 neighborhood in base point and direction.
    pub radius: f64,
}

impl Default for WfSetup {
    fn default() -> Self {
        WfSetup {
            lambda_max: 400.0,
            epsilon_threshold: 1e-3,
            min_r2: 0.99,
            radius: 0.05,
        }
    }
}

impl WfSetup {
    pub fn lambda_grid(&self) -> Result<Vec<f64>> {
        geometric_grid(self.lambda_max / 20.0, self.lambda_max, 16)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WfSample {
    pub z: Vec<f64>,
    pub zeta: Vec<f64>,
    pub epsilon: f64,
    pub r2: f64,
    pub floored: bool,
    /// The response vanished identically.
    pub vanishing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WfClassification {
    pub point: PhaseSpacePoint,
    pub regular: bool,
    pub min_epsilon: f64,
    pub min_r2: f64,
    pub samples: Vec<WfSample>,
    pub setup: WfSetup,
}

/// The 5×5 conic neighborhood of `u` on unit covectors. With offsets
/// `(a, b) ∈ r·{−1, −½, 0, ½, 1}²`, the base point moves by `a` along `ζ̂`
/// and by `b` across it while `ζ̂` turns by the angle `b`. On the line only
/// the first offset exists.
pub fn conic_neighborhood(u: &PhaseSpacePoint, radius: f64) -> Vec<PhaseSpacePoint> {
    let unit = u.normalized();
    let steps = [-1.0, -0.5, 0.0, 0.5, 1.0].map(|s| s * radius);
    if u.dim() == 1 {
        return steps
            .iter()
            .map(|a| PhaseSpacePoint {
                z: vec![unit.z[0] + a * unit.zeta[0]],
                zeta: unit.zeta.clone(),
            })
            .collect();
    }
    let (e, n) = ([unit.zeta[0], unit.zeta[1]], [-unit.zeta[1], unit.zeta[0]]);
    let mut out = Vec::with_capacity(25);
    for a in steps {
        for b in steps {
            let (s, c) = b.sin_cos();
            out.push(PhaseSpacePoint {
                z: vec![unit.z[0] + a * e[0] + b * n[0], unit.z[1] + a * e[1] + b * n[1]],
                zeta: vec![c * e[0] - s * e[1], s * e[0] + c * e[1]],
            });
        }
    }
    out
}

/// Regular iff every neighborhood point decays at rate `ε ≥ threshold` with
/// `r² ≥ min_r2`. Covectors are normalized, so `ζ` and `2ζ` classify alike.
pub fn wf_probe(f: &TestDistribution, u: &PhaseSpacePoint, setup: &WfSetup) -> Result<WfClassification> {
    let grid = setup.lambda_grid()?;
    let samples = conic_neighborhood(u, setup.radius)
        .into_par_iter()
        .map(|p| -> Result<WfSample> {
            let resp = fbi(f, &p, &grid)?;
            let vanishing = resp.magnitudes.iter().all(|m| *m == 0.0);
            let fit = decay_fit(&resp)?;
            Ok(WfSample {
                z: p.z,
                zeta: p.zeta,
                epsilon: if vanishing { f64::INFINITY } else { fit.epsilon },
                r2: fit.r2,
                floored: fit.floored,
                vanishing,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_epsilon = samples.iter().map(|s| s.epsilon).fold(f64::INFINITY, f64::min);
    let min_r2 = samples.iter().map(|s| s.r2).fold(f64::INFINITY, f64::min);
    let regular = samples
        .iter()
        .all(|s| s.vanishing || (s.epsilon >= setup.epsilon_threshold && s.r2 >= setup.min_r2));
    Ok(WfClassification {
        point: u.clone(),
        regular,
        min_epsilon,
        min_r2,
        samples,
        setup: setup.clone(),
    })
}
