use num_complex::Complex64;

use super::field::{invert, CMat};
use super::quad::PathQuadrature;
use super::source::VectorSource;
use super::transport::transport_along;
use super::weight::MatrixWeight;
use crate::error::{GeoError, Result};
use crate::geometry::{trace_influx, GeodesicPath, InfluxPoint, MetricField};

/// `W(z, x)` at every point of `q`, in the same order. Transport weights are
/// returned already inverted.
pub fn weight_on_path(weight: &MatrixWeight, z: &InfluxPoint, path: &GeodesicPath, q: &PathQuadrature) -> Result<Vec<CMat>> {
    match weight {
        MatrixWeight::Field(f) => q.points.iter().map(|p| MatrixWeight::eval_checked(f, p)).collect(),
        MatrixWeight::Transport(a) => {
            let sol = transport_along(a, z, path.clone());
            sol.quadrature_values().map(invert).collect()
        }
    }
}

/// `∫₀^{τ₊} W(z, x_z(t)) f(x_z(t)) dt` by Simpson on the traced path.
pub fn ray_transform(
    weight: &MatrixWeight,
    f: &VectorSource,
    z: &InfluxPoint,
    metric: &MetricField,
    quad_step: f64,
) -> Result<Vec<Complex64>> {
    let n = weight.size();
    if f.size() != n {
        return Err(GeoError::SizeMismatch {
            expected: n,
            found: f.size(),
        });
    }
    let path = trace_influx(metric, z, quad_step)?;
    let q = PathQuadrature::new(z, &path);
    let ws = weight_on_path(weight, z, &path, &q)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); n];
    for ((p, w), wm) in q.points.iter().zip(&q.weights).zip(&ws) {
        if *w == 0.0 {
            continue;
        }
        let fx = f.eval(&p.x);
        for (i, out) in acc.iter_mut().enumerate() {
            let s: Complex64 = (0..n).map(|j| wm[(i, j)] * fx[j]).sum();
            *out += s * *w;
        }
    }
    Ok(acc)
}
