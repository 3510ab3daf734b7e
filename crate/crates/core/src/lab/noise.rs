use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::probes::Reconstruction;
use super::report::Thresholds;
use crate::discrete::{cgls, relative_error};
use crate::error::Result;

/// Constant in the bound `Δerr ≤ C·η·σ_max/σ_min`.
pub const NOISE_CONSTANT: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseSample {
    pub eta: f64,
    pub clean_error: f64,
    pub noisy_error: f64,
    /// `η·σ_max/σ_min`.
    pub scale: f64,
    /// Error increase divided by `scale`.
    pub observed_constant: f64,
    pub within_bound: bool,
}

/// `b + e` with `e` uniform in the unit square per entry, rescaled so that
/// `‖e‖ = η‖b‖`.
pub fn perturb(data: &[Complex64], eta: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let e: Vec<Complex64> = (0..data.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let b_norm = data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let e_norm = e.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if e_norm == 0.0 {
        return data.to_vec();
    }
    data.iter().zip(&e).map(|(b, e)| b + e * (eta * b_norm / e_norm)).collect()
}

/// Reconstructs from the sinogram of `rec` with relative noise `η` added:
/// a seeded random complex perturbation `e` with `‖e‖ = η‖b‖`.
pub fn noise_floor(rec: &Reconstruction, etas: &[f64], seed: u64, thresholds: &Thresholds) -> Result<Vec<NoiseSample>> {
    let clean = rec.report.metric("rel_error");
    let ratio = rec.report.metric("sigma_max") / rec.report.metric("sigma_min");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    etas.iter()
        .map(|&eta| {
            let noisy = perturb(&rec.data, eta, &mut rng);
            let out = cgls(&rec.op, &noisy, thresholds.cgls_max_iters, thresholds.cgls_tol)?;
            let err = relative_error(&out.x, &rec.truth);
            let scale = eta * ratio;
            let observed = (err - clean).max(0.0) / scale;
            Ok(NoiseSample {
                eta,
                clean_error: clean,
                noisy_error: err,
                scale,
                observed_constant: observed,
                within_bound: observed <= NOISE_CONSTANT,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{influx_fan, MetricField};
    use crate::lab::{global_run, GridSetup};
    use crate::transforms::{MatrixWeight, VectorSource};

    #[test]
    fn small_noise_stays_under_the_condition_bound() {
        let fan = influx_fan(30, 12, 0.05).unwrap();
        let ph = VectorSource::gaussian(1, 1.0, [0.0, 0.1], 0.4);
        let thr = Thresholds::default();
        let rec = global_run(
            &MetricField::euclidean(),
            &MatrixWeight::identity(1),
            &ph,
            &fan,
            &GridSetup { m: 10, quad_step: 0.02 },
            &thr,
        )
        .unwrap();
        let s = noise_floor(&rec, &[1e-6, 1e-4], 7, &thr).unwrap();
        assert!(s[0].within_bound && s[1].within_bound, "{s:?}");
        assert!(s[1].noisy_error >= s[0].noisy_error * 0.5);
        assert_eq!(s, noise_floor(&rec, &[1e-6, 1e-4], 7, &thr).unwrap());
    }
}
