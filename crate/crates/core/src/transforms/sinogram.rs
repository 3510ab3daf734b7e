use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::field::{vec_row_major, CMat};
use super::ray::ray_transform;
use super::source::VectorSource;
use super::transport::scattering_data;
use super::weight::{Attenuation, MatrixWeight};
use crate::error::{GeoError, Result};
use crate::geometry::{trace_influx, InfluxPoint, MetricField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SinogramKind {
    /// One `ℂᴺ` vector per ray.
    Vector,
    /// One `N×N` matrix per ray, stored row-major.
    Matrix,
}

/// Ray-transform samples over a fan.
#[derive(Clone, Debug)]
pub struct Sinogram {
    pub fan: Vec<InfluxPoint>,
    pub tau: Vec<f64>,
    pub n: usize,
    pub kind: SinogramKind,
    pub values: Vec<Vec<Complex64>>,
    pub hashes: BTreeMap<String, String>,
}

impl Sinogram {
    pub fn new(fan: Vec<InfluxPoint>, tau: Vec<f64>, n: usize, kind: SinogramKind, values: Vec<Vec<Complex64>>) -> Result<Self> {
        let per_ray = match kind {
            SinogramKind::Vector => n,
            SinogramKind::Matrix => n * n,
        };
        if values.len() != fan.len() || tau.len() != fan.len() {
            return Err(GeoError::SizeMismatch {
                expected: fan.len(),
                found: values.len(),
            });
        }
        for (i, v) in values.iter().enumerate() {
            if v.len() != per_ray {
                return Err(GeoError::SizeMismatch {
                    expected: per_ray,
                    found: v.len(),
                }
                .at_ray(i));
            }
            if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(GeoError::Numeric("non-finite sinogram value".into()).at_ray(i));
            }
        }
        Ok(Sinogram {
            fan,
            tau,
            n,
            kind,
            values,
            hashes: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.fan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fan.is_empty()
    }

    pub fn matrix(&self, ray: usize) -> CMat {
        CMat::from_fn(self.n, self.n, |i, j| self.values[ray][i * self.n + j])
    }

    /// Ray-major, component-minor flattening (the row layout of the forward operator).
    pub fn flatten(&self) -> Vec<Complex64> {
        self.values.iter().flatten().copied().collect()
    }

    /// CSV with header `beta,alpha,tau,comp,re,im`, one line per ray and
    /// component. Floats use the shortest round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,alpha,tau,comp,re,im\n");
        for ((z, tau), vals) in self.fan.iter().zip(&self.tau).zip(&self.values) {
            for (c, v) in vals.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{},{},{}", z.beta, z.alpha, tau, c, v.re, v.im);
            }
        }
        out
    }
}

fn exit_times(fan: &[InfluxPoint], metric: &MetricField, step: f64) -> Result<Vec<f64>> {
    fan.par_iter()
        .enumerate()
        .map(|(i, z)| trace_influx(metric, z, step).map(|p| p.tau_plus).map_err(|e| e.at_ray(i)))
        .collect()
}

/// `R_W f` over a fan, evaluated in parallel; errors name the failing ray.
pub fn ray_sinogram(
    weight: &MatrixWeight,
    f: &VectorSource,
    fan: &[InfluxPoint],
    metric: &MetricField,
    quad_step: f64,
) -> Result<Sinogram> {
    let values = fan
        .par_iter()
        .enumerate()
        .map(|(i, z)| ray_transform(weight, f, z, metric, quad_step).map_err(|e| e.at_ray(i)))
        .collect::<Result<Vec<_>>>()?;
    let tau = exit_times(fan, metric, quad_step)?;
    Sinogram::new(fan.to_vec(), tau, weight.size(), SinogramKind::Vector, values)
}

/// `C_A` over a fan.
pub fn scattering_sinogram(a: &Attenuation, fan: &[InfluxPoint], metric: &MetricField, step: f64) -> Result<Sinogram> {
    let values = fan
        .par_iter()
        .enumerate()
        .map(|(i, z)| {
            scattering_data(a, z, metric, step)
                .map(|c| vec_row_major(&c))
                .map_err(|e| e.at_ray(i))
        })
        .collect::<Result<Vec<_>>>()?;
    let tau = exit_times(fan, metric, step)?;
    Sinogram::new(fan.to_vec(), tau, a.size(), SinogramKind::Matrix, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::influx_fan;

    #[test]
    fn csv_layout_has_n_rows_per_ray() {
        let m = MetricField::euclidean();
        let fan = influx_fan(3, 2, 0.2).unwrap();
        let s = ray_sinogram(&MatrixWeight::identity(2), &VectorSource::ones(2), &fan, &m, 1e-2).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "beta,alpha,tau,comp,re,im");
        assert_eq!(lines.len(), 1 + 2 * fan.len());
        for (k, line) in lines[1..].iter().enumerate() {
            let cols: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(cols[3] as usize, k % 2);
            assert!((cols[4] - cols[2]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_mismatched_values() {
        let fan = influx_fan(2, 1, 0.2).unwrap();
        let bad = Sinogram::new(
            fan.clone(),
            vec![2.0; 2],
            2,
            SinogramKind::Vector,
            vec![vec![Complex64::new(0.0, 0.0)]; 2],
        );
        assert!(bad.is_err());
        let nan = Sinogram::new(
            fan,
            vec![2.0; 2],
            1,
            SinogramKind::Vector,
            vec![vec![Complex64::new(f64::NAN, 0.0)]; 2],
        );
        assert!(matches!(nan, Err(GeoError::Ray { index: 0, .. })));
    }

    #[test]
    fn failing_ray_is_identified() {
        let m = MetricField::euclidean();
        let fan = influx_fan(2, 1, 0.2).unwrap();
        // zero step is rejected by the tracer for every ray; the first failure is reported
        let e = ray_sinogram(&MatrixWeight::identity(1), &VectorSource::ones(1), &fan, &m, 0.0).unwrap_err();
        assert!(matches!(e, GeoError::Ray { .. }));
    }
}
