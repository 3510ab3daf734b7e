//! Pseudo-linearization of the nonabelian transform.
//!
//! With `E(A,B)U = AU − UB`, the transport solution on matrices is
//! `W_E(t)X = W_A(t) X W_B(t)⁻¹`, hence
//! `I_{E(A,B)}(A − B) = ∫ W_A⁻¹ (A − B) W_B dt = W_A(τ₊)⁻¹ W_B(τ₊) − Id
//!                    = C_A C_B⁻¹ − Id`,
//! since `d/dt (W_A⁻¹ W_B) = W_A⁻¹ (A − B) W_B`.

use super::field::{invert, unvec_row_major, CMat, MatrixField};
use super::source::VectorSource;
use super::transport::{attenuated_transform, scattering_data};
use super::weight::Attenuation;
use crate::error::{GeoError, Result};
use crate::geometry::{InfluxPoint, MetricField};

/// `E(A,B)` acting on row-major `vec` of `N×N` matrices (size `N²`).
pub fn pseudo_weight(a: &Attenuation, b: &Attenuation) -> Result<Attenuation> {
    if a.size() != b.size() {
        return Err(GeoError::SizeMismatch {
            expected: a.size(),
            found: b.size(),
        });
    }
    Ok(Attenuation::new(MatrixField::KroneckerSum(
        Box::new(a.field.clone()),
        Box::new(b.field.clone()),
    )))
}

/// `(A − B)` as an `N²`-component source.
pub fn difference_source(a: &Attenuation, b: &Attenuation) -> VectorSource {
    VectorSource::Vectorized(MatrixField::Difference(Box::new(a.field.clone()), Box::new(b.field.clone())))
}

/// `I_{E(A,B)}(A − B)(z)` reshaped to `N×N`.
pub fn pseudo_transform(a: &Attenuation, b: &Attenuation, z: &InfluxPoint, metric: &MetricField, step: f64) -> Result<CMat> {
    let e = pseudo_weight(a, b)?;
    let v = attenuated_transform(&e, &difference_source(a, b), z, metric, step)?;
    Ok(unvec_row_major(&v, a.size()))
}

/// `I_{E(A,B)}(A − B)(z) − (C_A(z) C_B(z)⁻¹ − Id)`.
pub fn pseudo_residual(a: &Attenuation, b: &Attenuation, z: &InfluxPoint, metric: &MetricField, step: f64) -> Result<CMat> {
    let lhs = pseudo_transform(a, b, z, metric, step)?;
    let ca = scattering_data(a, z, metric, step)?;
    let cb = scattering_data(b, z, metric, step)?;
    let n = a.size();
    Ok(lhs - (ca * invert(&cb)? - CMat::identity(n, n)))
}
