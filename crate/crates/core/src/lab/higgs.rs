use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::probes::metric_hash;
use super::report::{check_boundary_convexity, check_nontrapping, Outcome, ProbeReport, Thresholds};
use crate::discrete::{assemble, cgls, relative_error, PixelBasis};
use crate::error::{GeoError, Result};
use crate::geometry::{InfluxPoint, MetricField, Point};
use crate::transforms::{
    invert, pseudo_weight, scattering_sinogram, vec_row_major, Attenuation, CMat, GridMatrixField, MatrixField, MatrixWeight, Sinogram,
    SinogramKind,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HiggsSetup {
    pub m: usize,
    pub quad_step: f64,
    pub max_iters: usize,
    /// Step factor applied after each consecutive misfit increase.
    pub damping: f64,
    /// Stop once the RMS Frobenius misfit per ray drops below this.
    pub misfit_tol: f64,
}

impl Default for HiggsSetup {
    fn default() -> Self {
        HiggsSetup {
            m: 16,
            quad_step: 0.01,
            max_iters: 15,
            damping: 0.7,
            misfit_tol: 1e-11,
        }
    }
}

/// Consecutive misfit increases that abort the iteration.
pub const DIVERGENCE_STREAK: usize = 3;

#[derive(Clone, Debug)]
pub struct HiggsResult {
    pub field: GridMatrixField,
    pub misfit_history: Vec<f64>,
    pub iterations: usize,
    pub report: ProbeReport,
}

fn grid_attenuation(field: &GridMatrixField) -> Result<Attenuation> {
    Attenuation::higgs(MatrixField::Grid(field.clone()))
}

/// `vec(C_Φ C_Ψ⁻¹ − Id)` over the fan and its RMS Frobenius norm per ray.
fn misfit(scatter: &Sinogram, psi: &GridMatrixField, metric: &MetricField, step: f64) -> Result<(Vec<Complex64>, f64)> {
    let c_psi = scattering_sinogram(&grid_attenuation(psi)?, &scatter.fan, metric, step)?;
    let n = psi.n;
    let mut out = Vec::with_capacity(scatter.len() * n * n);
    for ray in 0..scatter.len() {
        let r = scatter.matrix(ray) * invert(&c_psi.matrix(ray)).map_err(|e| e.at_ray(ray))? - CMat::identity(n, n);
        out.extend(vec_row_major(&r));
    }
    let norm = (out.iter().map(|z| z.norm_sqr()).sum::<f64>() / scatter.len() as f64).sqrt();
    Ok((out, norm))
}

/// Gauss–Newton recovery of a Higgs field on a pixel grid from its
/// scattering data. At `Ψ` the misfit `C_Φ C_Ψ⁻¹ − Id = I_{E(Φ,Ψ)}(Φ − Ψ)`
/// is linearized to `I_{E(Ψ,Ψ)} δ`, which is solved for `δ` by CGLS.
pub fn higgs_recover(
    metric: &MetricField,
    scatter: &Sinogram,
    init: &GridMatrixField,
    setup: &HiggsSetup,
    thresholds: &Thresholds,
    truth: Option<&GridMatrixField>,
) -> Result<HiggsResult> {
    if scatter.kind != SinogramKind::Matrix {
        return Err(GeoError::InvalidArgument(
            "Higgs recovery needs a sinogram of scattering matrices".into(),
        ));
    }
    if scatter.n != init.n {
        return Err(GeoError::SizeMismatch {
            expected: scatter.n,
            found: init.n,
        });
    }
    let mut report = ProbeReport::new("higgs", thresholds);
    check_boundary_convexity(&mut report, metric, 64)?;
    check_nontrapping(&mut report, metric, &scatter.fan, setup.quad_step)?;
    report.hashes.insert("metric".into(), metric_hash(metric));
    report.hashes.extend(scatter.hashes.clone());

    let mut psi = init.clone();
    let (mut res, mut fit) = misfit(scatter, &psi, metric, setup.quad_step)?;
    let mut history = vec![fit];
    let mut increases = 0;
    let mut iterations = 0;
    let mut step = 1.0;
    while fit > setup.misfit_tol && iterations < setup.max_iters {
        let a = grid_attenuation(&psi)?;
        let weight = MatrixWeight::Transport(pseudo_weight(&a, &a)?);
        let op = assemble(&weight, &psi.basis, &scatter.fan, metric, setup.quad_step)?;
        let out = cgls(&op, &res, thresholds.cgls_max_iters, thresholds.cgls_tol)?;
        for (p, d) in psi.coeffs.iter_mut().zip(&out.x) {
            *p += d * step;
        }
        iterations += 1;
        let (r, f) = misfit(scatter, &psi, metric, setup.quad_step)?;
        if !f.is_finite() {
            return Err(GeoError::Numeric(format!("misfit became non-finite at iteration {iterations}")));
        }
        history.push(f);
        if f > fit {
            increases += 1;
            if increases >= DIVERGENCE_STREAK {
                return Err(GeoError::Divergence { history });
            }
            step *= setup.damping;
        } else {
            increases = 0;
            step = 1.0;
        }
        res = r;
        fit = f;
    }
    report.set("iterations", iterations as f64);
    report.set("misfit", fit);
    report.set("initial_misfit", history[0]);
    report.residual_history = history.clone();
    let converged = fit <= setup.misfit_tol;
    if !converged {
        report
            .notes
            .push(format!("misfit {fit:.3e} above tolerance after {iterations} iterations"));
    }
    report.outcome = match truth {
        Some(t) => {
            if t.coeffs.len() != psi.coeffs.len() {
                return Err(GeoError::SizeMismatch {
                    expected: psi.coeffs.len(),
                    found: t.coeffs.len(),
                });
            }
            let err = relative_error(&psi.coeffs, &t.coeffs);
            report.set("rel_error", err);
            if err <= thresholds.max_rel_error {
                Outcome::Pass
            } else {
                Outcome::Fail
            }
        }
        None if converged => Outcome::Pass,
        None => Outcome::Fail,
    };
    Ok(HiggsResult {
        field: psi,
        misfit_history: history,
        iterations,
        report,
    })
}

/// Samples a position-only field on the pixel grid, generates its scattering
/// data over `fan` and recovers it from `init` (zero when `None`).
pub fn higgs_probe(
    metric: &MetricField,
    phantom: &MatrixField,
    fan: &[InfluxPoint],
    setup: &HiggsSetup,
    thresholds: &Thresholds,
    init: Option<&GridMatrixField>,
) -> Result<HiggsResult> {
    let mut pre = ProbeReport::new("higgs", thresholds);
    pre.require(
        "position-only field",
        phantom.is_position_only(),
        "Higgs fields may not depend on direction".into(),
    )?;
    let basis = Arc::new(PixelBasis::new(setup.m)?);
    let n = phantom.size();
    let truth = GridMatrixField::sample(basis.clone(), n, |x: &Point| phantom.eval(&crate::transforms::FieldPoint::at(*x)));
    let scatter = scattering_sinogram(&grid_attenuation(&truth)?, fan, metric, setup.quad_step)?;
    let zero = GridMatrixField::zeros(basis, n);
    let mut out = higgs_recover(metric, &scatter, init.unwrap_or(&zero), setup, thresholds, Some(&truth))?;
    let mut hyps = pre.hypotheses;
    hyps.append(&mut out.report.hypotheses);
    out.report.hypotheses = hyps;
    Ok(out)
}

/// Scalar closed form: for constant `c` the scattering datum is
/// `exp(c τ₊)`, so `c = log C(z) / τ₊(z)` ray by ray.
pub fn higgs_constant_closed_form(scatter: &Sinogram) -> Result<Vec<Complex64>> {
    if scatter.n != 1 || scatter.kind != SinogramKind::Matrix {
        return Err(GeoError::InvalidArgument("closed form needs scalar scattering data".into()));
    }
    Ok(scatter.values.iter().zip(&scatter.tau).map(|(v, &t)| v[0].ln() / t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::influx_fan;
    use crate::transforms::MatrixFieldConfig;

    fn small() -> HiggsSetup {
        HiggsSetup {
            m: 8,
            quad_step: 0.02,
            ..Default::default()
        }
    }

    #[test]
    fn fixed_point_takes_no_iterations() {
        let m = MetricField::euclidean();
        let fan = influx_fan(16, 8, 0.05).unwrap();
        let basis = Arc::new(PixelBasis::new(8).unwrap());
        let phi = GridMatrixField::sample(basis, 2, |x| {
            CMat::from_fn(2, 2, |i, j| Complex64::new(0.2 * x.x * (i + 1) as f64, 0.1 * x.y * j as f64))
        });
        let s = scattering_sinogram(&grid_attenuation(&phi).unwrap(), &fan, &m, 0.02).unwrap();
        let out = higgs_recover(&m, &s, &phi, &small(), &Thresholds::default(), Some(&phi)).unwrap();
        assert_eq!(out.iterations, 0);
        assert!(out.misfit_history.len() == 1 && out.misfit_history[0] < 1e-14);
        assert_eq!(out.report.metric("rel_error"), 0.0);
    }

    #[test]
    fn scalar_constant_closed_form() {
        let m = MetricField::euclidean();
        let fan = influx_fan(12, 6, 0.05).unwrap();
        let c = Complex64::new(0.4, -0.3);
        let a = Attenuation::constant(CMat::from_element(1, 1, c));
        let s = scattering_sinogram(&a, &fan, &m, 0.01).unwrap();
        for est in higgs_constant_closed_form(&s).unwrap() {
            assert!((est - c).norm() < 1e-6, "{est}");
        }
    }

    #[test]
    fn small_matrix_recovery_converges() {
        let m = MetricField::euclidean();
        let fan = influx_fan(24, 12, 0.05).unwrap();
        let phantom = MatrixFieldConfig::Expr {
            n: 2,
            entries: vec![
                vec!["0.3*exp(-(x1^2+x2^2)/0.2)".into(), "0.1*x1".into()],
                vec!["-0.1*x2".into(), "0.2*i*exp(-(x1^2+x2^2)/0.2)".into()],
            ],
        }
        .build()
        .unwrap();
        let out = higgs_probe(&m, &phantom, &fan, &small(), &Thresholds::default(), None).unwrap();
        assert!(out.report.passed(), "{:?}", out.report.metrics);
        assert!(out.iterations <= 15);
    }

    #[test]
    fn direction_dependent_field_is_rejected() {
        let bad = MatrixFieldConfig::Expr {
            n: 1,
            entries: vec![vec!["v1".into()]],
        }
        .build()
        .unwrap();
        let fan = influx_fan(8, 4, 0.1).unwrap();
        let e = higgs_probe(&MetricField::euclidean(), &bad, &fan, &small(), &Thresholds::default(), None).unwrap_err();
        assert!(matches!(e, GeoError::Hypothesis(_)));
    }
}
