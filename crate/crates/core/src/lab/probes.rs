use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::report::{check_boundary_convexity, check_nontrapping, Outcome, ProbeReport, Thresholds};
use crate::discrete::{assemble, cgls, relative_error, sigma_extremes, ForwardOperator, PixelBasis};
use crate::error::{GeoError, Result};
use crate::geometry::{strict_convexity, InfluxPoint, MetricField, Point};
use crate::io::sha256_hex;
use crate::transforms::{MatrixWeight, VectorSource};

/// Pixel grid and quadrature step of a probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSetup {
    pub m: usize,
    pub quad_step: f64,
}

impl Default for GridSetup {
    fn default() -> Self {
        GridSetup { m: 32, quad_step: 0.01 }
    }
}

/// Everything a reconstruction produced, for callers that need more than
/// the report.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub basis: Arc<PixelBasis>,
    pub op: ForwardOperator,
    pub truth: Vec<Complex64>,
    pub data: Vec<Complex64>,
    pub x: Vec<Complex64>,
    pub report: ProbeReport,
}

pub(crate) fn check_weight(report: &mut ProbeReport, weight: &MatrixWeight, phantom: &VectorSource) -> Result<()> {
    if weight.size() != phantom.size() {
        return Err(GeoError::SizeMismatch {
            expected: weight.size(),
            found: phantom.size(),
        });
    }
    report.require("analytic weight", weight.is_analytic(), format!("weight kind {}", weight.kind()))
}

pub(crate) fn metric_hash(metric: &MetricField) -> String {
    sha256_hex(format!("{:?}", metric.config()).as_bytes())
}

/// Fills σ, cgls and error metrics for `op` and the self-consistent data of `truth`.
pub(crate) fn solve_and_score(
    report: &mut ProbeReport,
    op: &ForwardOperator,
    truth: &[Complex64],
    thresholds: &Thresholds,
) -> Result<(Vec<Complex64>, Vec<Complex64>, f64, f64)> {
    let (smin, smax) = sigma_extremes(op)?;
    report.set("sigma_min", smin);
    report.set("sigma_max", smax);
    report.set("rows", op.rows() as f64);
    report.set("cols", op.cols() as f64);
    report.set("oversampling", op.rows() as f64 / op.cols() as f64);
    let data = op.apply(truth)?;
    let out = cgls(op, &data, thresholds.cgls_max_iters, thresholds.cgls_tol)?;
    let err = relative_error(&out.x, truth);
    report.set("rel_error", err);
    report.set("cgls_iterations", out.iterations as f64);
    report.set("cgls_converged", if out.converged { 1.0 } else { 0.0 });
    report.set("max_residual", out.history.last().copied().unwrap_or(0.0));
    report.residual_history = out.history;
    Ok((out.x, data, smin, smax))
}

/// Global injectivity probe: checks the hypotheses, assembles the operator
/// on an `m×m` grid, estimates `σ_min, σ_max` and reconstructs the phantom
/// from its own sinogram by CGLS.
pub fn global_run(
    metric: &MetricField,
    weight: &MatrixWeight,
    phantom: &VectorSource,
    fan: &[InfluxPoint],
    setup: &GridSetup,
    thresholds: &Thresholds,
) -> Result<Reconstruction> {
    let mut report = ProbeReport::new("global", thresholds);
    check_weight(&mut report, weight, phantom)?;
    check_boundary_convexity(&mut report, metric, 64)?;
    check_nontrapping(&mut report, metric, fan, setup.quad_step)?;
    let basis = Arc::new(PixelBasis::new(setup.m)?);
    let op = assemble(weight, &basis, fan, metric, setup.quad_step)?;
    report.hashes.insert("metric".into(), metric_hash(metric));
    report.hashes.insert("operator".into(), op.hash().to_string());
    report.set("zero_columns", op.zero_columns().len() as f64);
    let truth = phantom.project(&basis);
    let (x, data, smin, smax) = solve_and_score(&mut report, &op, &truth, thresholds)?;
    let full_rank = smin > thresholds.sigma_rel_floor * smax;
    if !full_rank {
        report.notes.push("operator is numerically rank deficient".into());
    }
    report.outcome = if full_rank && report.metric("rel_error") <= thresholds.max_rel_error {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(Reconstruction {
        basis,
        op,
        truth,
        data,
        x,
        report,
    })
}

pub fn global_probe(
    metric: &MetricField,
    weight: &MatrixWeight,
    phantom: &VectorSource,
    fan: &[InfluxPoint],
    setup: &GridSetup,
    thresholds: &Thresholds,
) -> Result<ProbeReport> {
    Ok(global_run(metric, weight, phantom, fan, setup, thresholds)?.report)
}

/// Local data near one boundary point: rays entering within `beta_halfwidth`
/// of `beta0` and within an angular window of glancing on either side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalSetup {
    pub beta0: f64,
    pub beta_halfwidth: f64,
    /// Nominal window from glancing; widened so that rays reach the lens bottom.
    pub alpha_window: f64,
    pub glancing_margin: f64,
    pub n_beta: usize,
    pub n_alpha: usize,
    pub lens_depth: f64,
    pub lens_half_angle: f64,
    pub m: usize,
    pub quad_step: f64,
}

impl Default for LocalSetup {
    fn default() -> Self {
        LocalSetup {
            beta0: 0.0,
            beta_halfwidth: 0.3,
            alpha_window: 0.35,
            glancing_margin: 0.01,
            n_beta: 61,
            n_alpha: 24,
            lens_depth: 0.15,
            lens_half_angle: 0.15,
            m: 64,
            quad_step: 0.005,
        }
    }
}

impl LocalSetup {
    /// Angular distance from glancing actually used: a euclidean chord at
    /// angle `w` from glancing dips to depth `1 − cos w`, so the window is
    /// at least `acos(1 − depth) + 0.1`.
    pub fn effective_window(&self) -> f64 {
        self.alpha_window
            .max((1.0 - self.lens_depth).clamp(-1.0, 1.0).acos() + 0.1)
            .min(FRAC_PI_2)
    }

    pub fn fan(&self) -> Result<Vec<InfluxPoint>> {
        if self.n_beta < 2 || self.n_alpha < 2 {
            return Err(GeoError::InvalidArgument("local fan needs n_beta, n_alpha ≥ 2".into()));
        }
        let w = self.effective_window();
        if !(self.glancing_margin > 0.0 && self.glancing_margin < w) {
            return Err(GeoError::InvalidArgument(format!(
                "glancing margin {} must lie in (0, {w})",
                self.glancing_margin
            )));
        }
        let per_side = self.n_alpha.div_ceil(2);
        let mut fan = Vec::with_capacity(self.n_beta * per_side * 2);
        for i in 0..self.n_beta {
            let beta = self.beta0 - self.beta_halfwidth + 2.0 * self.beta_halfwidth * i as f64 / (self.n_beta - 1) as f64;
            for sign in [-1.0, 1.0] {
                for j in 0..per_side {
                    let off = if per_side == 1 {
                        self.glancing_margin
                    } else {
                        self.glancing_margin + (w - self.glancing_margin) * j as f64 / (per_side - 1) as f64
                    };
                    fan.push(InfluxPoint::new(beta, sign * (FRAC_PI_2 - off)));
                }
            }
        }
        Ok(fan)
    }

    pub fn in_lens(&self, x: &Point) -> bool {
        let r = x.norm();
        let mut d = (x.y.atan2(x.x) - self.beta0).rem_euclid(2.0 * PI);
        if d > PI {
            d = 2.0 * PI - d;
        }
        r > 1.0 - self.lens_depth && d <= self.lens_half_angle
    }
}

/// Local injectivity probe. Unknowns are the lens pixels plus every pixel
/// where the phantom is nonzero; phantom pixels the local fan never sees make
/// the outcome non-identifiable.
pub fn local_probe(
    metric: &MetricField,
    weight: &MatrixWeight,
    phantom: &VectorSource,
    setup: &LocalSetup,
    thresholds: &Thresholds,
) -> Result<ProbeReport> {
    let mut report = ProbeReport::new("local", thresholds);
    check_weight(&mut report, weight, phantom)?;
    let kappa = strict_convexity(metric, setup.beta0)?;
    report.set("boundary_convexity", kappa);
    report.require(
        "strictly convex at the boundary point",
        kappa > 0.0,
        format!("second fundamental form {kappa:.6e}"),
    )?;
    let fan = setup.fan()?;
    check_nontrapping(&mut report, metric, &fan, setup.quad_step)?;
    report.set("alpha_window", setup.effective_window());
    report.set("rays", fan.len() as f64);

    let full = PixelBasis::new(setup.m)?;
    let values: Vec<f64> = full
        .centers()
        .iter()
        .map(|c| phantom.eval(c).iter().map(|v| v.norm()).fold(0.0, f64::max))
        .collect();
    let peak = values.iter().cloned().fold(0.0, f64::max);
    let in_support = |v: f64| peak > 0.0 && v > 1e-12 * peak;
    let outside_lens = full
        .centers()
        .iter()
        .zip(&values)
        .filter(|(c, v)| in_support(**v) && !setup.in_lens(c))
        .count();
    if outside_lens > 0 {
        report
            .notes
            .push(format!("phantom nonzero at {outside_lens} pixels outside the lens"));
    }
    let basis = Arc::new(PixelBasis::with_mask(setup.m, 2.0 / setup.m as f64, |c| {
        setup.in_lens(c) || in_support(phantom.eval(c).iter().map(|v| v.norm()).fold(0.0, f64::max))
    })?);
    report.set("lens_pixels", basis.centers().iter().filter(|c| setup.in_lens(c)).count() as f64);
    report.set("unknown_pixels", basis.len() as f64);

    let op = assemble(weight, &basis, &fan, metric, setup.quad_step)?;
    report.hashes.insert("metric".into(), metric_hash(metric));
    report.hashes.insert("operator".into(), op.hash().to_string());
    let truth = phantom.project(&basis);
    let zero = op.zero_columns();
    let n = op.components();
    let unseen_phantom = zero
        .iter()
        .filter(|&&p| truth[p * n..(p + 1) * n].iter().any(|v| v.norm() > 1e-12 * peak))
        .count();
    report.set("zero_columns", zero.len() as f64);
    report.set("unseen_phantom_pixels", unseen_phantom as f64);
    solve_and_score(&mut report, &op, &truth, thresholds)?;
    report.outcome = if unseen_phantom > 0 {
        report
            .notes
            .push("phantom lies outside every local ray: not identifiable from local data".into());
        Outcome::NonIdentifiable
    } else if report.metric("rel_error") <= thresholds.max_rel_error
        && report.metric("sigma_min") > thresholds.sigma_rel_floor * report.metric("sigma_max")
    {
        Outcome::Pass
    } else {
        Outcome::Fail
    };
    Ok(report)
}
