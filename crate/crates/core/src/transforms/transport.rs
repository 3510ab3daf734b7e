//! Transport solutions, attenuated transform and scattering data.
//!
//! `W_A` solves `Ẇ + A W = 0` with `W(0) = Id` (anchored at entry), while
//! `U` solves the same equation with `U(τ₊) = Id` (anchored at exit). They
//! are related by `U(t) = W_A(t)·W_A(τ₊)⁻¹`, so `C_A = U(0) = W_A(τ₊)⁻¹`.

use num_complex::Complex64;

use super::field::{invert, CMat, FieldPoint};
use super::quad::PathQuadrature;
use super::source::VectorSource;
use super::weight::Attenuation;
use crate::error::{GeoError, Result};
use crate::geometry::{trace_influx, GeodesicPath, InfluxPoint, MetricField};

/// `W_A` on the nodes and Hermite midpoints of a traced path.
#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub path: GeodesicPath,
    pub nodes: Vec<CMat>,
    pub mids: Vec<CMat>,
}

impl TransportSolution {
    pub fn at_exit(&self) -> &CMat {
        self.nodes.last().expect("at least one node")
    }

    /// Values in [`PathQuadrature`] order: nodes, then midpoints.
    pub fn quadrature_values(&self) -> impl Iterator<Item = &CMat> {
        self.nodes.iter().chain(&self.mids)
    }

    /// `U(tᵢ) = W_A(tᵢ)·W_A(τ₊)⁻¹` at the nodes.
    pub fn fundamental(&self) -> Result<Vec<CMat>> {
        let exit_inv = invert(self.at_exit())?;
        Ok(self.nodes.iter().map(|w| w * &exit_inv).collect())
    }
}

fn attenuation_values(a: &Attenuation, z: &InfluxPoint, path: &GeodesicPath) -> (Vec<CMat>, Vec<CMat>) {
    let nodes = path.samples.iter().map(|s| a.eval(&FieldPoint::on_ray(z, s))).collect();
    let mids = path.midpoints[..path.intervals()]
        .iter()
        .map(|s| a.eval(&FieldPoint::on_ray(z, s)))
        .collect();
    (nodes, mids)
}

/// Solves `Ẇ = −A W` along an already traced path with classical RK4.
pub fn transport_along(a: &Attenuation, z: &InfluxPoint, path: GeodesicPath) -> TransportSolution {
    let n = a.size();
    let (an, am) = attenuation_values(a, z, &path);
    let mut nodes = Vec::with_capacity(an.len());
    let mut mids = Vec::with_capacity(am.len());
    let mut w = CMat::identity(n, n);
    nodes.push(w.clone());
    for i in 0..path.intervals() {
        let dt = path.samples[i + 1].t - path.samples[i].t;
        let half = Complex64::new(0.5 * dt, 0.0);
        let full = Complex64::new(dt, 0.0);
        let k1 = -(&an[i] * &w);
        let k2 = -(&am[i] * (&w + &k1 * half));
        let k3 = -(&am[i] * (&w + &k2 * half));
        let k4 = -(&an[i + 1] * (&w + &k3 * full));
        let next = &w + (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
        let d0 = -(&an[i] * &w);
        let d1 = -(&an[i + 1] * &next);
        mids.push((&w + &next) * Complex64::new(0.5, 0.0) + (d0 - d1) * Complex64::new(dt / 8.0, 0.0));
        nodes.push(next.clone());
        w = next;
    }
    TransportSolution { path, nodes, mids }
}

pub fn transport_weight(a: &Attenuation, z: &InfluxPoint, metric: &MetricField, step: f64) -> Result<TransportSolution> {
    let path = trace_influx(metric, z, step)?;
    Ok(transport_along(a, z, path))
}

fn check_sizes(a: &Attenuation, f: &VectorSource) -> Result<()> {
    if a.size() != f.size() {
        return Err(GeoError::SizeMismatch {
            expected: a.size(),
            found: f.size(),
        });
    }
    Ok(())
}

/// `I_A f(z) = ∫₀^{τ₊} W_A⁻¹ f dt`, with `W_A` from [`transport_weight`].
pub fn attenuated_transform(a: &Attenuation, f: &VectorSource, z: &InfluxPoint, metric: &MetricField, step: f64) -> Result<Vec<Complex64>> {
    check_sizes(a, f)?;
    let sol = transport_weight(a, z, metric, step)?;
    let q = PathQuadrature::new(z, &sol.path);
    let mut acc = vec![Complex64::new(0.0, 0.0); a.size()];
    for ((p, w), wa) in q.points.iter().zip(&q.weights).zip(sol.quadrature_values()) {
        if *w == 0.0 {
            continue;
        }
        let winv = invert(wa)?;
        let fx = f.eval(&p.x);
        for (i, out) in acc.iter_mut().enumerate() {
            let s: Complex64 = (0..fx.len()).map(|j| winv[(i, j)] * fx[j]).sum();
            *out += s * *w;
        }
    }
    Ok(acc)
}

/// `u(0)` for `u̇ = −A u − f`, `u(τ₊) = 0`, integrated backwards by RK4.
/// Independent of [`attenuated_transform`]; the two agree to quadrature error.
pub fn attenuated_transform_direct(
    a: &Attenuation,
    f: &VectorSource,
    z: &InfluxPoint,
    metric: &MetricField,
    step: f64,
) -> Result<Vec<Complex64>> {
    check_sizes(a, f)?;
    let path = trace_influx(metric, z, step)?;
    let (an, am) = attenuation_values(a, z, &path);
    let fnode: Vec<Vec<Complex64>> = path.samples.iter().map(|s| f.eval(&s.x)).collect();
    let fmid: Vec<Vec<Complex64>> = path.midpoints[..path.intervals()].iter().map(|s| f.eval(&s.x)).collect();
    let rhs = |a: &CMat, f: &[Complex64], u: &nalgebra::DVector<Complex64>| -> nalgebra::DVector<Complex64> {
        -(a * u) - nalgebra::DVector::from_column_slice(f)
    };
    let mut u = nalgebra::DVector::<Complex64>::zeros(a.size());
    for i in (0..path.intervals()).rev() {
        let h = -(path.samples[i + 1].t - path.samples[i].t);
        let k1 = rhs(&an[i + 1], &fnode[i + 1], &u);
        let k2 = rhs(&am[i], &fmid[i], &(&u + &k1 * Complex64::new(0.5 * h, 0.0)));
        let k3 = rhs(&am[i], &fmid[i], &(&u + &k2 * Complex64::new(0.5 * h, 0.0)));
        let k4 = rhs(&an[i], &fnode[i], &(&u + &k3 * Complex64::new(h, 0.0)));
        u += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0);
    }
    Ok(u.iter().copied().collect())
}

/// Nonabelian scattering data `C_A(z) = W_A(τ₊)⁻¹`.
pub fn scattering_data(a: &Attenuation, z: &InfluxPoint, metric: &MetricField, step: f64) -> Result<CMat> {
    let sol = transport_weight(a, z, metric, step)?;
    invert(sol.at_exit())
}

/// `U(z, x_z(tᵢ))` at the path nodes, normalized by `U(τ₊) = Id`.
pub fn fundamental_solution(a: &Attenuation, z: &InfluxPoint, metric: &MetricField, step: f64) -> Result<(GeodesicPath, Vec<CMat>)> {
    let sol = transport_weight(a, z, metric, step)?;
    let u = sol.fundamental()?;
    Ok((sol.path, u))
}
