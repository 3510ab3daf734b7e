use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::{min_circle_convexity, nontrapping_scan, strict_convexity, InfluxPoint, MetricField, DEFAULT_TAU_MAX};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Fail,
    /// Some phantom pixels are invisible to the fan.
    NonIdentifiable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Thresholds a probe is judged against; recorded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub max_rel_error: f64,
    /// `σ_min/σ_max` at or below this counts as rank deficient.
    pub sigma_rel_floor: f64,
    pub cgls_tol: f64,
    pub cgls_max_iters: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            max_rel_error: 0.01,
            sigma_rel_floor: 1e-10,
            cgls_tol: 1e-12,
            cgls_max_iters: 4000,
        }
    }
}

impl Thresholds {
    pub fn with_max_error(max_rel_error: f64) -> Self {
        Thresholds {
            max_rel_error,
            ..Default::default()
        }
    }

    fn record(&self, into: &mut BTreeMap<String, f64>) {
        into.insert("max_rel_error".into(), self.max_rel_error);
        into.insert("sigma_rel_floor".into(), self.sigma_rel_floor);
        into.insert("cgls_tol".into(), self.cgls_tol);
        into.insert("cgls_max_iters".into(), self.cgls_max_iters as f64);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub probe: String,
    pub hashes: BTreeMap<String, String>,
    pub hypotheses: Vec<HypothesisCheck>,
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    pub residual_history: Vec<f64>,
    pub notes: Vec<String>,
    pub outcome: Outcome,
}

impl ProbeReport {
    pub fn new(probe: &str, thresholds: &Thresholds) -> Self {
        let mut t = BTreeMap::new();
        thresholds.record(&mut t);
        ProbeReport {
            probe: probe.into(),
            hashes: BTreeMap::new(),
            hypotheses: Vec::new(),
            metrics: BTreeMap::new(),
            thresholds: t,
            residual_history: Vec::new(),
            notes: Vec::new(),
            outcome: Outcome::Fail,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn metric(&self, key: &str) -> f64 {
        self.metrics.get(key).copied().unwrap_or(f64::NAN)
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    /// Records a hypothesis and aborts with it named when it fails.
    pub fn require(&mut self, name: &str, passed: bool, detail: String) -> Result<()> {
        self.hypotheses.push(HypothesisCheck {
            name: name.into(),
            passed,
            detail: detail.clone(),
        });
        if passed {
            Ok(())
        } else {
            Err(GeoError::Hypothesis(format!("{name}: {detail}")))
        }
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypotheses.iter().all(|h| h.passed)
    }
}

/// Boundary convexity at `samples` equally spaced angles.
pub(crate) fn check_boundary_convexity(report: &mut ProbeReport, metric: &MetricField, samples: usize) -> Result<()> {
    let mut min = f64::INFINITY;
    for k in 0..samples {
        let beta = std::f64::consts::TAU * k as f64 / samples as f64;
        min = min.min(strict_convexity(metric, beta)?);
    }
    report.set("min_boundary_convexity", min);
    report.require(
        "strictly convex boundary",
        min > 0.0,
        format!("min second fundamental form {min:.6e}"),
    )
}

pub(crate) fn check_nontrapping(report: &mut ProbeReport, metric: &MetricField, fan: &[InfluxPoint], step: f64) -> Result<()> {
    let scan = nontrapping_scan(metric, fan, DEFAULT_TAU_MAX, step)?;
    if let Some(t) = scan.max_tau_plus {
        report.set("max_tau_plus", t);
    }
    report.require(
        "non-trapping",
        scan.passed(),
        format!("{} of {} rays hit the budget {}", scan.trapped.len(), scan.rays, scan.budget),
    )
}

pub(crate) fn check_ring_convexity(report: &mut ProbeReport, metric: &MetricField, radii: &[f64]) -> Result<()> {
    let mut min = f64::INFINITY;
    for &r in radii {
        min = min.min(min_circle_convexity(metric, r, 64)?);
    }
    report.set("min_ring_convexity", min);
    report.require(
        "strictly convex foliation",
        min > 0.0,
        format!("min ring curvature {min:.6e} over {} rings", radii.len()),
    )
}
