use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::probes::{check_weight, metric_hash, GridSetup};
use super::report::{check_boundary_convexity, check_nontrapping, check_ring_convexity, Outcome, ProbeReport, Thresholds};
use crate::discrete::{assemble, cgls, relative_error, ForwardOperator, PixelBasis};
use crate::error::{GeoError, Result};
use crate::geometry::{trace_influx, InfluxPoint, MetricField};
use crate::transforms::{MatrixWeight, VectorSource};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripSetup {
    pub n_rings: usize,
    /// Rays for ring `k` may dip this many pixel spacings below `r_k`; the
    /// pixels they touch there are solved for and then discarded.
    pub overlap: f64,
}

impl Default for StripSetup {
    fn default() -> Self {
        StripSetup { n_rings: 4, overlap: 4.0 }
    }
}

impl StripSetup {
    pub fn rings(n_rings: usize) -> Self {
        StripSetup {
            n_rings,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct StripResult {
    pub basis: Arc<PixelBasis>,
    pub x: Vec<Complex64>,
    /// Pixel columns of each ring, outermost first.
    pub ring_pixels: Vec<Vec<usize>>,
    /// Relative error per ring; absolute norm for rings where the truth vanishes.
    pub ring_errors: Vec<f64>,
    pub report: ProbeReport,
}

/// Ring radii `r_k = 1 − k/n` for `k = 1..n`.
pub fn ring_radii(n_rings: usize) -> Vec<f64> {
    (1..=n_rings).map(|k| 1.0 - k as f64 / n_rings as f64).collect()
}

fn ring_of(radius: f64, radii: &[f64]) -> usize {
    radii.iter().position(|&r| radius >= r).unwrap_or(radii.len() - 1)
}

/// Deepest point of every ray, as a chart radius.
pub fn ray_depths(metric: &MetricField, fan: &[InfluxPoint], step: f64) -> Result<Vec<f64>> {
    fan.par_iter()
        .enumerate()
        .map(|(i, z)| trace_influx(metric, z, step).map(|p| p.min_radius()).map_err(|e| e.at_ray(i)))
        .collect()
}

/// Outside-in reconstruction over concentric rings. Ring `k` keeps its own
/// pixels from a solve over the rays reaching no deeper than the overlap band
/// below `r_k`; rings already solved are frozen and their contribution
/// removed from the data.
#[allow(clippy::too_many_arguments)]
pub fn layer_stripping(
    metric: &MetricField,
    op: &ForwardOperator,
    basis: Arc<PixelBasis>,
    fan: &[InfluxPoint],
    data: &[Complex64],
    strip: &StripSetup,
    setup: &GridSetup,
    thresholds: &Thresholds,
    truth: Option<&[Complex64]>,
) -> Result<StripResult> {
    let n_rings = strip.n_rings;
    if n_rings == 0 {
        return Err(GeoError::InvalidArgument("layer stripping needs at least one ring".into()));
    }
    if op.rays() != fan.len() || op.pixels() != basis.len() {
        return Err(GeoError::SizeMismatch {
            expected: fan.len(),
            found: op.rays(),
        });
    }
    if data.len() != op.rows() {
        return Err(GeoError::SizeMismatch {
            expected: op.rows(),
            found: data.len(),
        });
    }
    let mut report = ProbeReport::new("strip", thresholds);
    check_boundary_convexity(&mut report, metric, 64)?;
    let radii = ring_radii(n_rings);
    check_ring_convexity(&mut report, metric, &radii[..n_rings - 1])?;
    check_nontrapping(&mut report, metric, fan, setup.quad_step)?;
    report.hashes.insert("metric".into(), metric_hash(metric));
    report.hashes.insert("operator".into(), op.hash().to_string());

    let depths = if n_rings == 1 {
        vec![0.0; fan.len()]
    } else {
        ray_depths(metric, fan, setup.quad_step)?
    };
    let n = op.components();
    let mut ring_pixels = vec![Vec::new(); n_rings];
    let ring_index: Vec<usize> = basis.centers().iter().map(|c| ring_of(c.norm(), &radii)).collect();
    for (col, &k) in ring_index.iter().enumerate() {
        ring_pixels[k].push(col);
    }

    let mut x = vec![Complex64::new(0.0, 0.0); op.cols()];
    let mut solved: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for (k, &r_k) in radii.iter().enumerate() {
        let ring = k + 1;
        let floor = r_k - strip.overlap * basis.spacing();
        let rays: Vec<usize> = (0..fan.len()).filter(|&i| n_rings == 1 || depths[i] >= floor).collect();
        let mut touched = vec![false; basis.len()];
        for &i in &rays {
            for &p in op.ray_pixels(i) {
                touched[p as usize] = true;
            }
        }
        if rays.is_empty() || !ring_pixels[k].iter().any(|&p| touched[p]) {
            return Err(GeoError::NoCoveringRays { ring });
        }
        // own pixels first, then the touched part of the deeper rings
        let mut sub_cols = ring_pixels[k].clone();
        for inner in &ring_pixels[k + 1..] {
            sub_cols.extend(inner.iter().copied().filter(|&p| touched[p]));
        }
        let sub = op.select(&rays, &sub_cols);
        let mut rhs: Vec<Complex64> = rays.iter().flat_map(|&i| data[i * n..(i + 1) * n].iter().copied()).collect();
        if !solved.is_empty() {
            let frozen = op.select(&rays, &solved);
            let known = frozen.apply(&ForwardOperator::gather(&solved, n, &x))?;
            for (b, a) in rhs.iter_mut().zip(&known) {
                *b -= a;
            }
        }
        let out = cgls(&sub, &rhs, thresholds.cgls_max_iters, thresholds.cgls_tol)?;
        let own = ring_pixels[k].len();
        let mut ring_x = out.x;
        ring_x.truncate(own * n);
        ForwardOperator::scatter(&ring_pixels[k], n, &ring_x, &mut x);
        solved.extend(ring_pixels[k].iter().copied());
        report.set(&format!("ring{ring}_rays"), rays.len() as f64);
        report.set(&format!("ring{ring}_unknowns"), sub_cols.len() as f64);
        report.set(&format!("ring{ring}_iterations"), out.iterations as f64);
        history.extend(out.history);
    }
    report.residual_history = history;

    let mut ring_errors = Vec::new();
    if let Some(truth) = truth {
        if truth.len() != x.len() {
            return Err(GeoError::SizeMismatch {
                expected: x.len(),
                found: truth.len(),
            });
        }
        for (k, pixels) in ring_pixels.iter().enumerate() {
            let e = relative_error(&ForwardOperator::gather(pixels, n, &x), &ForwardOperator::gather(pixels, n, truth));
            report.set(&format!("ring{}_error", k + 1), e);
            ring_errors.push(e);
        }
        let err = relative_error(&x, truth);
        report.set("rel_error", err);
        report.outcome = if err <= thresholds.max_rel_error {
            Outcome::Pass
        } else {
            Outcome::Fail
        };
    }
    Ok(StripResult {
        basis,
        x,
        ring_pixels,
        ring_errors,
        report,
    })
}

/// Layer stripping on the self-consistent sinogram of `phantom`.
pub fn strip_probe(
    metric: &MetricField,
    weight: &MatrixWeight,
    phantom: &VectorSource,
    fan: &[InfluxPoint],
    strip: &StripSetup,
    setup: &GridSetup,
    thresholds: &Thresholds,
) -> Result<StripResult> {
    let mut pre = ProbeReport::new("strip", thresholds);
    check_weight(&mut pre, weight, phantom)?;
    let basis = Arc::new(PixelBasis::new(setup.m)?);
    let op = assemble(weight, &basis, fan, metric, setup.quad_step)?;
    let truth = phantom.project(&basis);
    let data = op.apply(&truth)?;
    let mut out = layer_stripping(metric, &op, basis, fan, &data, strip, setup, thresholds, Some(&truth))?;
    let mut hyps = pre.hypotheses;
    hyps.append(&mut out.report.hypotheses);
    out.report.hypotheses = hyps;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::influx_fan;
    use crate::lab::global_run;

    #[test]
    fn radii_and_membership() {
        let r = ring_radii(4);
        assert_eq!(r, vec![0.75, 0.5, 0.25, 0.0]);
        assert_eq!(ring_of(0.9, &r), 0);
        assert_eq!(ring_of(0.75, &r), 0);
        assert_eq!(ring_of(0.6, &r), 1);
        assert_eq!(ring_of(0.0, &r), 3);
    }

    #[test]
    fn single_ring_is_the_global_probe() {
        let m = MetricField::euclidean();
        let fan = influx_fan(24, 10, 0.05).unwrap();
        let setup = GridSetup { m: 10, quad_step: 0.02 };
        let thr = Thresholds::default();
        let ph = VectorSource::gaussian(1, 1.0, [0.1, 0.1], 0.4);
        let g = global_run(&m, &MatrixWeight::identity(1), &ph, &fan, &setup, &thr).unwrap();
        let s = strip_probe(&m, &MatrixWeight::identity(1), &ph, &fan, &StripSetup::rings(1), &setup, &thr).unwrap();
        assert_eq!(s.x, g.x);
        assert_eq!(s.report.metric("rel_error"), g.report.metric("rel_error"));
    }

    #[test]
    fn ring_without_rays_is_named() {
        let m = MetricField::euclidean();
        // rays close to glancing never reach the inner rings
        let fan: Vec<InfluxPoint> = (0..40)
            .flat_map(|i| {
                let b = std::f64::consts::TAU * i as f64 / 40.0;
                [InfluxPoint::new(b, 1.3), InfluxPoint::new(b, -1.3)]
            })
            .collect();
        let setup = GridSetup { m: 10, quad_step: 0.02 };
        let e = strip_probe(
            &m,
            &MatrixWeight::identity(1),
            &VectorSource::ones(1),
            &fan,
            &StripSetup { n_rings: 3, overlap: 0.0 },
            &setup,
            &Thresholds::default(),
        )
        .unwrap_err();
        assert!(matches!(e, GeoError::NoCoveringRays { ring: 2 }), "{e}");
    }
}
