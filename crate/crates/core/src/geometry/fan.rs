use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geodesic::{trace_with_budget, InfluxPoint, PathOutcome};
use super::metric::MetricField;
use crate::error::{GeoError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanConfig {
    pub n_beta: usize,
    pub n_alpha: usize,
    pub alpha_margin: f64,
}

impl FanConfig {
    pub fn len(&self) -> usize {
        self.n_beta * self.n_alpha
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform grid over `∂₊SM`: `β ∈ [0, 2π)` and, for `n_alpha > 1`,
/// `α ∈ [−π/2 + margin, π/2 − margin]` inclusive. A single `α` sample is the
/// normal ray `α = 0`. Points are ordered β-major.
pub fn influx_fan(n_beta: usize, n_alpha: usize, alpha_margin: f64) -> Result<Vec<InfluxPoint>> {
    if n_beta == 0 || n_alpha == 0 {
        return Err(GeoError::InvalidArgument("fan counts must be at least 1".into()));
    }
    if !(alpha_margin > 0.0 && alpha_margin < FRAC_PI_2) {
        return Err(GeoError::InvalidArgument(format!(
            "alpha_margin must lie in (0, π/2), got {alpha_margin}"
        )));
    }
    let alphas: Vec<f64> = if n_alpha == 1 {
        vec![0.0]
    } else {
        let lo = -FRAC_PI_2 + alpha_margin;
        let hi = FRAC_PI_2 - alpha_margin;
        (0..n_alpha).map(|j| lo + (hi - lo) * j as f64 / (n_alpha - 1) as f64).collect()
    };
    Ok((0..n_beta)
        .flat_map(|i| {
            let beta = 2.0 * PI * i as f64 / n_beta as f64;
            alphas.iter().map(move |&alpha| InfluxPoint::new(beta, alpha))
        })
        .collect())
}

pub fn fan_from_config(cfg: &FanConfig) -> Result<Vec<InfluxPoint>> {
    influx_fan(cfg.n_beta, cfg.n_alpha, cfg.alpha_margin)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NontrappingReport {
    pub rays: usize,
    pub max_tau_plus: Option<f64>,
    /// Indices into the fan of rays that hit the budget.
    pub trapped: Vec<usize>,
    pub budget: f64,
}

impl NontrappingReport {
    pub fn passed(&self) -> bool {
        self.trapped.is_empty()
    }
}

/// Traces every fan ray and records exit times and budget hits.
pub fn nontrapping_scan(metric: &MetricField, fan: &[InfluxPoint], tau_max: f64, step: f64) -> Result<NontrappingReport> {
    if !(tau_max > 0.0) {
        return Err(GeoError::InvalidArgument(format!("tau_max must be positive, got {tau_max}")));
    }
    let outcomes = fan
        .par_iter()
        .map(|z| {
            if z.is_glancing() {
                return Ok((0.0, PathOutcome::Exited));
            }
            let path = trace_with_budget(metric, &z.tangent(metric), step, tau_max)?;
            Ok((path.tau_plus, path.outcome))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = NontrappingReport {
        rays: fan.len(),
        budget: tau_max,
        ..Default::default()
    };
    for (i, (tau, outcome)) in outcomes.into_iter().enumerate() {
        match outcome {
            PathOutcome::Exited => {
                report.max_tau_plus = Some(report.max_tau_plus.map_or(tau, |m: f64| m.max(tau)));
            }
            PathOutcome::Trapped { .. } => report.trapped.push(i),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_rays_at_quarter_turns() {
        let fan = influx_fan(4, 1, 0.3).unwrap();
        let betas: Vec<f64> = fan.iter().map(|z| z.beta).collect();
        assert_eq!(fan.len(), 4);
        for (b, want) in betas.iter().zip([0.0, FRAC_PI_2, PI, 1.5 * PI]) {
            assert!((b - want).abs() < 1e-15);
        }
        assert!(fan.iter().all(|z| z.alpha == 0.0));
    }

    #[test]
    fn fan_points_are_strictly_inward() {
        let m = MetricField::conformal_bump(0.1, [0.3, 0.0], 0.5).unwrap();
        let fan = influx_fan(8, 7, 0.05).unwrap();
        assert!(fan.iter().all(|z| z.inward_component(&m) > 0.0));
        let a: Vec<f64> = fan.iter().take(7).map(|z| z.alpha).collect();
        assert!((a[0] + FRAC_PI_2 - 0.05).abs() < 1e-15 && (a[6] - FRAC_PI_2 + 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(influx_fan(0, 3, 0.1).is_err());
        assert!(influx_fan(3, 3, 0.0).is_err());
        assert!(influx_fan(3, 3, FRAC_PI_2).is_err());
    }

    #[test]
    fn euclidean_scan_is_bounded_by_diameter() {
        let m = MetricField::euclidean();
        let fan = influx_fan(12, 9, 0.1).unwrap();
        let r = nontrapping_scan(&m, &fan, 100.0, 1e-3).unwrap();
        assert!(r.passed());
        let max = r.max_tau_plus.unwrap();
        assert!(max <= 2.0 + 1e-9 && (max - 2.0).abs() < 1e-9);
    }

    #[test]
    fn small_budget_reports_diameter_trapped() {
        let m = MetricField::euclidean();
        let fan = influx_fan(2, 1, 0.1).unwrap();
        let r = nontrapping_scan(&m, &fan, 1.9, 1e-3).unwrap();
        assert_eq!(r.trapped, vec![0, 1]);
        assert!(!r.passed());
    }

    #[test]
    fn empty_fan_gives_empty_report() {
        let r = nontrapping_scan(&MetricField::euclidean(), &[], 10.0, 1e-3).unwrap();
        assert_eq!(r.rays, 0);
        assert!(r.max_tau_plus.is_none() && r.trapped.is_empty());
    }
}
