//! Conjugate points along geodesics from the scalar Jacobi equation
//! `J'' + K(t) J = 0`, `J(0) = 0`, `J'(0) = 1`.

use super::geodesic::{trace_influx, InfluxPoint};
use super::metric::MetricField;
use crate::error::Result;

/// Curvature samples on a grid: `nodes[i]` at `times[i]`, `mids[i]` halfway
/// through interval `i`.
struct Profile<'a> {
    times: &'a [f64],
    nodes: &'a [f64],
    mids: &'a [f64],
}

fn hermite_root(t0: f64, t1: f64, j0: f64, j1: f64, d0: f64, d1: f64) -> f64 {
    let h = t1 - t0;
    let eval = |s: f64| {
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * j0 + (s3 - 2.0 * s2 + s) * h * d0 + (-2.0 * s3 + 3.0 * s2) * j1 + (s3 - s2) * h * d1
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let sign_lo = eval(lo).signum();
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if eval(mid).signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t0 + 0.5 * (lo + hi) * h
}

fn jacobi_zeros(p: &Profile) -> Vec<f64> {
    let mut zeros = Vec::new();
    let (mut j, mut dj) = (0.0f64, 1.0f64);
    for i in 0..p.times.len().saturating_sub(1) {
        let h = p.times[i + 1] - p.times[i];
        let (k0, km, k1) = (p.nodes[i], p.mids[i], p.nodes[i + 1]);
        // y = (J, J'), y' = (J', −K J)
        let f = |k: f64, y: (f64, f64)| (y.1, -k * y.0);
        let a = f(k0, (j, dj));
        let b = f(km, (j + 0.5 * h * a.0, dj + 0.5 * h * a.1));
        let c = f(km, (j + 0.5 * h * b.0, dj + 0.5 * h * b.1));
        let d = f(k1, (j + h * c.0, dj + h * c.1));
        let jn = j + h / 6.0 * (a.0 + 2.0 * b.0 + 2.0 * c.0 + d.0);
        let djn = dj + h / 6.0 * (a.1 + 2.0 * b.1 + 2.0 * c.1 + d.1);
        if i > 0 && j != 0.0 && jn.signum() != j.signum() {
            zeros.push(hermite_root(p.times[i], p.times[i + 1], j, jn, dj, djn));
        } else if jn == 0.0 {
            zeros.push(p.times[i + 1]);
        }
        j = jn;
        dj = djn;
    }
    zeros
}

/// Zeros of `J` on `(0, length]` for a curvature profile given as a function
/// of arclength, integrated with step `h`.
pub fn conjugate_times_for_profile(curvature: impl Fn(f64) -> f64, length: f64, h: f64) -> Vec<f64> {
    let n = (length / h).ceil().max(1.0) as usize;
    let dt = length / n as f64;
    let times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let nodes: Vec<f64> = times.iter().map(|&t| curvature(t)).collect();
    let mids: Vec<f64> = times.windows(2).map(|w| curvature(0.5 * (w[0] + w[1]))).collect();
    jacobi_zeros(&Profile {
        times: &times,
        nodes: &nodes,
        mids: &mids,
    })
}

/// Conjugate times in `(0, τ₊)` along the geodesic from `z`, using the Gauss
/// curvature of `metric`.
pub fn conjugate_scan(metric: &MetricField, z: &InfluxPoint, h: f64) -> Result<Vec<f64>> {
    let path = trace_influx(metric, z, h)?;
    let times: Vec<f64> = path.samples.iter().map(|s| s.t).collect();
    let nodes: Vec<f64> = path.samples.iter().map(|s| metric.gauss_curvature(&s.x)).collect();
    let mids: Vec<f64> = path.midpoints.iter().map(|s| metric.gauss_curvature(&s.x)).collect();
    let tau = path.tau_plus;
    Ok(jacobi_zeros(&Profile {
        times: &times,
        nodes: &nodes,
        mids: &mids,
    })
    .into_iter()
    .filter(|&t| t < tau)
    .collect())
}

/// `true` when no fan ray carries a conjugate point (the Bolker-type
/// precondition for the geodesic transform).
pub fn fan_free_of_conjugate_points(metric: &MetricField, fan: &[InfluxPoint], h: f64) -> Result<bool> {
    use rayon::prelude::*;
    let counts = fan
        .par_iter()
        .map(|z| conjugate_scan(metric, z, h).map(|v| v.len()))
        .collect::<Result<Vec<_>>>()?;
    Ok(counts.iter().all(|&c| c == 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fan::influx_fan;
    use std::f64::consts::PI;

    #[test]
    fn flat_metric_has_no_conjugate_points() {
        let m = MetricField::euclidean();
        assert!(conjugate_scan(&m, &InfluxPoint::new(0.0, 0.2), 1e-3).unwrap().is_empty());
    }

    #[test]
    fn unit_curvature_conjugate_at_pi() {
        let zeros = conjugate_times_for_profile(|_| 1.0, 4.0, 1e-3);
        assert_eq!(zeros.len(), 1);
        assert!((zeros[0] - PI).abs() < 1e-6, "{}", zeros[0]);
        let zeros = conjugate_times_for_profile(|_| 4.0, 4.0, 1e-3);
        assert_eq!(zeros.len(), 2);
        assert!((zeros[0] - PI / 2.0).abs() < 1e-6 && (zeros[1] - PI).abs() < 1e-6);
    }

    #[test]
    fn small_bumps_are_free_of_conjugate_points() {
        let fan = influx_fan(16, 8, 0.05).unwrap();
        for a in [0.05, -0.05, 0.02] {
            let m = MetricField::conformal_bump(a, [0.0, 0.0], 0.5).unwrap();
            assert!(fan_free_of_conjugate_points(&m, &fan, 2e-3).unwrap());
        }
    }
}
