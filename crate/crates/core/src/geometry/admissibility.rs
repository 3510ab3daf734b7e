//! Admissibility conditions for traced curves.

use serde::Serialize;

use super::geodesic::{GeodesicPath, PathSample};
use super::metric::{rho, MetricField};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// (i) `x(t)` lies in the interior for `0 < t < τ₊`.
    pub interior: bool,
    /// (ii) no self-intersection, by the sample-distance surrogate.
    pub no_self_intersection: bool,
    /// (iii) `|ẋ| > 0` everywhere.
    pub regular: bool,
    /// (iv) finite exit time.
    pub finite_exit: bool,
    /// (v) holds vacuously for a codimension-one fan.
    pub transversal: bool,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.interior && self.no_self_intersection && self.regular && self.finite_exit && self.transversal
    }
}

/// Pairs of samples separated by more than `min_separation` in curve
/// parameter but closer than `distance` in the chart count as a crossing.
pub fn has_self_intersection(samples: &[PathSample], distance: f64, min_separation: f64) -> bool {
    let d2 = distance * distance;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            if b.t - a.t > min_separation && (a.x - b.x).norm_squared() < d2 {
                return true;
            }
        }
    }
    false
}

pub fn admissibility_check(_metric: &MetricField, path: &GeodesicPath) -> AdmissibilityReport {
    let n = path.samples.len();
    let inner = if n > 2 { &path.samples[1..n - 1] } else { &[][..] };
    let interior = inner.iter().chain(&path.midpoints).all(|s| rho(&s.x) > 0.0);
    let h = path.step;
    AdmissibilityReport {
        interior,
        no_self_intersection: !has_self_intersection(&path.samples, 1.5 * h, 10.0 * h),
        regular: path.samples.iter().all(|s| s.v.norm() > 0.0),
        finite_exit: !path.is_trapped() && path.tau_plus.is_finite(),
        transversal: true,
    }
}
