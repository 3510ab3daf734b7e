use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::sync::Arc;

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::packet::{packet_peak, PhaseSpacePoint};
use crate::error::{GeoError, Result};

/// Largest admissible quadrature step in units of `λ^{−1/2}`.
pub const MAX_RELATIVE_STEP: f64 = 0.125;

/// Gaussian windows are cut where `λ d²/2 = 36`.
const WINDOW_EXPONENT: f64 = 36.0;

type DensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Compactly supported test distribution in dimension 1 or 2. Dirac and
/// indicator pairings are evaluated in closed form (the disk up to a smooth
/// one-dimensional quadrature); the other kinds use a tensor trapezoid rule
/// with step `step·λ^{−1/2}`.
#[derive(Clone)]
pub enum TestDistribution {
    Zero {
        dim: usize,
    },
    Dirac {
        point: Vec<f64>,
    },
    /// `1_{[a,b]}` on the line.
    Interval {
        a: f64,
        b: f64,
    },
    /// `1_{|x − c| ≤ R}` in the plane.
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    /// `exp(1 − 1/(1 − |x − c|²/R²))` inside the ball.
    SmoothBump {
        center: Vec<f64>,
        radius: f64,
        step: f64,
    },
    /// Single layer `δ(|x − c| − R)`, conormal to the circle.
    CircleLayer {
        center: [f64; 2],
        radius: f64,
        step: f64,
    },
    /// Bounded function of `m` variables, sampled by quadrature.
    Function {
        dim: usize,
        f: Arc<DensityFn>,
        step: f64,
    },
}

impl fmt::Debug for TestDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestDistribution::Zero { dim } => write!(f, "Zero({dim})"),
            TestDistribution::Dirac { point } => write!(f, "Dirac({point:?})"),
            TestDistribution::Interval { a, b } => write!(f, "Interval({a}, {b})"),
            TestDistribution::Disk { center, radius } => write!(f, "Disk({center:?}, {radius})"),
            TestDistribution::SmoothBump { center, radius, step } => write!(f, "SmoothBump({center:?}, {radius}, step {step})"),
            TestDistribution::CircleLayer { center, radius, step } => {
                write!(f, "CircleLayer({center:?}, {radius}, step {step})")
            }
            TestDistribution::Function { dim, step, .. } => write!(f, "Function(dim {dim}, step {step})"),
        }
    }
}

/// `∫_a^b e^{−λ(w−z)²/2 − iλwζ} dw` through the Faddeeva function. Each
/// endpoint's error function is written as `±(1 − e^{−E²} w(±iE))` with the
/// argument of `w` in the upper half-plane, so no large terms cancel.
pub fn gaussian_segment(a: f64, b: f64, z: f64, zeta: f64, lambda: f64) -> Complex64 {
    if b <= a {
        return Complex64::new(0.0, 0.0);
    }
    let s = (lambda / 2.0).sqrt();
    let end = |e: f64| -> (f64, Complex64) {
        let d = e - z;
        let sigma = if d >= 0.0 { 1.0 } else { -1.0 };
        let arg = Complex64::new(-sigma * s * zeta, sigma * s * d);
        let tail = Complex64::from_polar((-lambda * d * d / 2.0).exp(), -lambda * d * zeta) * arg.w();
        (sigma, tail * sigma)
    };
    let (sb, tb) = end(b);
    let (sa, ta) = end(a);
    let bulk = (sb - sa) * (-lambda * zeta * zeta / 2.0).exp();
    let bracket = Complex64::new(bulk, 0.0) - tb + ta;
    Complex64::from_polar((PI / (2.0 * lambda)).sqrt(), -lambda * zeta * z) * bracket
}

fn window(lambda: f64) -> f64 {
    (2.0 * WINDOW_EXPONENT / lambda).sqrt()
}

fn check_step(step: f64, lambda: f64) -> Result<f64> {
    if !(step > 0.0) || step > MAX_RELATIVE_STEP {
        return Err(GeoError::QuadratureStep {
            step: step / lambda.sqrt(),
            limit: MAX_RELATIVE_STEP / lambda.sqrt(),
            lambda,
        });
    }
    Ok(step / lambda.sqrt())
}

/// Demodulated Gaussian `e^{−λ(w−z)²/2 − iλwζ}` sampled on a uniform 1D grid.
fn axis_factors(z: f64, zeta: f64, lambda: f64, h: f64) -> (Vec<f64>, Vec<Complex64>) {
    let d = window(lambda);
    let n = (d / h).ceil() as i64;
    (-n..=n)
        .map(|k| {
            let w = z + k as f64 * h;
            (
                w,
                Complex64::from_polar((-lambda * (w - z).powi(2) / 2.0).exp(), -lambda * w * zeta),
            )
        })
        .unzip()
}

fn tensor_pairing(dim: usize, f: &DensityFn, u: &PhaseSpacePoint, lambda: f64, h: f64) -> Complex64 {
    let (xs, ax) = axis_factors(u.z[0], u.zeta[0], lambda, h);
    if dim == 1 {
        let s: Complex64 = xs.iter().zip(&ax).map(|(x, a)| a * f(&[*x])).sum();
        return s * h;
    }
    let (ys, ay) = axis_factors(u.z[1], u.zeta[1], lambda, h);
    let mut s = Complex64::new(0.0, 0.0);
    for (y, by) in ys.iter().zip(&ay) {
        let row: Complex64 = xs.iter().zip(&ax).map(|(x, a)| a * f(&[*x, *y])).sum();
        s += row * by;
    }
    s * h * h
}

/// Simpson's rule with at least `n` (rounded to even) intervals.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

impl TestDistribution {
    pub fn dim(&self) -> usize {
        match self {
            TestDistribution::Zero { dim } | TestDistribution::Function { dim, .. } => *dim,
            TestDistribution::Dirac { point } => point.len(),
            TestDistribution::Interval { .. } => 1,
            TestDistribution::Disk { .. } | TestDistribution::CircleLayer { .. } => 2,
            TestDistribution::SmoothBump { center, .. } => center.len(),
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(
            self,
            TestDistribution::Zero { .. }
                | TestDistribution::Dirac { .. }
                | TestDistribution::Interval { .. }
                | TestDistribution::Disk { .. }
        )
    }

    fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if !(1..=2).contains(&dim) {
            return Err(GeoError::InvalidArgument(format!("distribution dimension {dim} not in {{1, 2}}")));
        }
        match self {
            TestDistribution::Interval { a, b } if !(a < b) => Err(GeoError::InvalidArgument(format!("interval [{a}, {b}] is empty"))),
            TestDistribution::Disk { radius, .. }
            | TestDistribution::SmoothBump { radius, .. }
            | TestDistribution::CircleLayer { radius, .. }
                if !(*radius > 0.0) =>
            {
                Err(GeoError::InvalidArgument("radius must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// `L^λ f(u) = ⟨f, M̄_u^λ⟩`.
    pub fn pairing(&self, u: &PhaseSpacePoint, lambda: f64) -> Result<Complex64> {
        self.validate()?;
        if self.dim() != u.dim() {
            return Err(GeoError::SizeMismatch {
                expected: self.dim(),
                found: u.dim(),
            });
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(GeoError::InvalidArgument(format!("λ = {lambda} must be positive")));
        }
        let m = self.dim();
        let peak = packet_peak(m, lambda);
        let value = match self {
            TestDistribution::Zero { .. } => Complex64::new(0.0, 0.0),
            TestDistribution::Dirac { point } => {
                let d2: f64 = point.iter().zip(&u.z).map(|(p, z)| (p - z) * (p - z)).sum();
                let phase: f64 = point.iter().zip(&u.zeta).map(|(p, k)| p * k).sum();
                Complex64::from_polar((-lambda * d2 / 2.0).exp(), -lambda * phase)
            }
            TestDistribution::Interval { a, b } => gaussian_segment(*a, *b, u.z[0], u.zeta[0], lambda),
            TestDistribution::Disk { center, radius } => disk_pairing(*center, *radius, u, lambda),
            TestDistribution::SmoothBump { center, radius, step } => {
                let h = check_step(*step, lambda)?;
                let (c, r2) = (center.clone(), radius * radius);
                let f = move |w: &[f64]| {
                    let s = w.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r2;
                    if s < 1.0 {
                        (1.0 - 1.0 / (1.0 - s)).exp()
                    } else {
                        0.0
                    }
                };
                tensor_pairing(m, &f, u, lambda, h)
            }
            TestDistribution::CircleLayer { center, radius, step } => {
                let h = check_step(*step, lambda)?;
                let n = ((2.0 * PI * radius / h).ceil() as usize).max(16);
                let dt = 2.0 * PI / n as f64;
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    let t = k as f64 * dt;
                    let w = [center[0] + radius * t.cos(), center[1] + radius * t.sin()];
                    let d2 = (w[0] - u.z[0]).powi(2) + (w[1] - u.z[1]).powi(2);
                    s += Complex64::from_polar((-lambda * d2 / 2.0).exp(), -lambda * (w[0] * u.zeta[0] + w[1] * u.zeta[1]));
                }
                s * (radius * dt)
            }
            TestDistribution::Function { dim, f, step } => {
                let h = check_step(*step, lambda)?;
                tensor_pairing(*dim, f.as_ref(), u, lambda, h)
            }
        };
        Ok(value * peak)
    }
}

/// Disk pairing in the frame `(p, q)` with `p` along `ζ`: each chord is a
/// Gaussian segment; rows are integrated in `θ` with `q = c_q + R sin θ`,
/// which removes the square-root endpoints.
fn disk_pairing(center: [f64; 2], radius: f64, u: &PhaseSpacePoint, lambda: f64) -> Complex64 {
    let k = u.zeta_norm();
    let e = [u.zeta[0] / k, u.zeta[1] / k];
    let proj = |v: [f64; 2]| (v[0] * e[0] + v[1] * e[1], -v[0] * e[1] + v[1] * e[0]);
    let (cp, cq) = proj(center);
    let (zp, zq) = proj([u.z[0], u.z[1]]);
    let d = window(lambda);
    let lo = ((zq - d - cq) / radius).clamp(-1.0, 1.0).asin();
    let hi = ((zq + d - cq) / radius).clamp(-1.0, 1.0).asin();
    if hi <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let h = MAX_RELATIVE_STEP / (lambda.sqrt() * radius);
    let n = ((hi - lo) / h).ceil() as usize;
    debug_assert!(lo >= -FRAC_PI_2 && hi <= FRAC_PI_2);
    simpson(lo, hi, n.max(8), |t| {
        let q = cq + radius * t.sin();
        let half = radius * t.cos();
        let row = gaussian_segment(cp - half, cp + half, zp, k, lambda);
        row * ((-lambda * (q - zq).powi(2) / 2.0).exp() * radius * t.cos())
    })
}

/// JSON form of a test distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionConfig {
    Dirac {
        point: Vec<f64>,
    },
    Interval {
        a: f64,
        b: f64,
    },
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    SmoothBump {
        center: Vec<f64>,
        radius: f64,
        #[serde(default = "default_step")]
        step: f64,
    },
    CircleLayer {
        center: [f64; 2],
        radius: f64,
        #[serde(default = "default_step")]
        step: f64,
    },
}

fn default_step() -> f64 {
    MAX_RELATIVE_STEP
}

impl DistributionConfig {
    pub fn build(&self) -> Result<TestDistribution> {
        let d = match self.clone() {
            DistributionConfig::Dirac { point } => TestDistribution::Dirac { point },
            DistributionConfig::Interval { a, b } => TestDistribution::Interval { a, b },
            DistributionConfig::Disk { center, radius } => TestDistribution::Disk { center, radius },
            DistributionConfig::SmoothBump { center, radius, step } => TestDistribution::SmoothBump { center, radius, step },
            DistributionConfig::CircleLayer { center, radius, step } => TestDistribution::CircleLayer { center, radius, step },
        };
        d.validate().map_err(|e| GeoError::Config(e.to_string()))?;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microlocal::packet::wave_packet;

    /// Composite Simpson on `[a, b]` of `f·M̄`, independent of the closed forms.
    fn brute_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, u: &PhaseSpacePoint, lambda: f64, n: usize) -> Complex64 {
        simpson(a, b, n, |w| wave_packet(u, lambda, &[w]).conj() * f(w))
    }

    #[test]
    fn segment_matches_quadrature() {
        for &(z, zeta, lambda) in &[
            (0.0, 1.0, 10.0),
            (0.9, -0.7, 25.0),
            (1.0, 1.0, 40.0),
            (-1.3, 0.4, 6.0),
            (0.2, 2.5, 60.0),
        ] {
            let u = PhaseSpacePoint::new(vec![z], vec![zeta]).unwrap();
            let exact = TestDistribution::Interval { a: -1.0, b: 1.0 }.pairing(&u, lambda).unwrap();
            let q = brute_1d(|_| 1.0, -1.0, 1.0, &u, lambda, 20000);
            assert!(
                (exact - q).norm() < 1e-10 * q.norm().max(1e-3),
                "{z} {zeta} {lambda}: {exact} vs {q}"
            );
        }
    }

    #[test]
    fn segment_is_stable_at_large_lambda() {
        // interior point: both bulk and tails are ~e^{−λ/2}
        let v = gaussian_segment(-1.0, 1.0, 0.0, 1.0, 400.0);
        let bulk = (2.0 * PI / 400.0).sqrt() * (-200.0f64).exp();
        assert!(v.norm().is_finite() && v.norm() > 0.0);
        assert!(v.norm() < 10.0 * bulk);
    }

    #[test]
    fn dirac_pairing_is_closed_form() {
        let d = TestDistribution::Dirac { point: vec![0.0] };
        let u = PhaseSpacePoint::new(vec![0.5], vec![1.0]).unwrap();
        for lambda in [20.0, 100.0, 400.0] {
            let v = d.pairing(&u, lambda).unwrap().norm();
            let want = packet_peak(1, lambda) * (-lambda * 0.125).exp();
            assert!((v - want).abs() <= 1e-10 * want);
        }
    }

    #[test]
    fn disk_matches_tensor_quadrature() {
        let disk = TestDistribution::Disk {
            center: [0.1, 0.0],
            radius: 0.5,
        };
        let f = |w: &[f64]| if (w[0] - 0.1).powi(2) + w[1] * w[1] <= 0.25 { 1.0 } else { 0.0 };
        for (z, zeta) in [([0.3, 0.2], [0.6, 0.8]), ([0.6, 0.0], [1.0, 0.0]), ([0.0, 0.0], [0.0, -1.0])] {
            let u = PhaseSpacePoint::new(z.to_vec(), zeta.to_vec()).unwrap();
            let lambda = 8.0;
            let closed = disk.pairing(&u, lambda).unwrap();
            let h = 1.0 / 1500.0;
            let brute = tensor_pairing(2, &f, &u, lambda, h) * packet_peak(2, lambda);
            assert!((closed - brute).norm() < 2e-3 * packet_peak(2, lambda), "{closed} vs {brute}");
        }
    }

    #[test]
    fn bump_quadrature_matches_simpson() {
        let bump = TestDistribution::SmoothBump {
            center: vec![0.2],
            radius: 0.5,
            step: 0.1,
        };
        let u = PhaseSpacePoint::new(vec![0.3], vec![-1.0]).unwrap();
        let f = |w: f64| {
            let s = (w - 0.2).powi(2) / 0.25;
            if s < 1.0 {
                (1.0 - 1.0 / (1.0 - s)).exp()
            } else {
                0.0
            }
        };
        let lambda = 30.0;
        let q = brute_1d(f, -0.3, 0.7, &u, lambda, 20000);
        let v = bump.pairing(&u, lambda).unwrap();
        assert!((v - q).norm() < 1e-6 * packet_peak(1, lambda), "{v} vs {q}");
    }

    #[test]
    fn circle_layer_has_the_expected_mass() {
        // at λ → 0 the pairing tends to the circumference times the peak
        let c = TestDistribution::CircleLayer {
            center: [0.0, 0.0],
            radius: 0.3,
            step: 0.1,
        };
        let u = PhaseSpacePoint::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let lambda = 1e-4;
        let v = c.pairing(&u, lambda).unwrap() / packet_peak(2, lambda);
        assert!((v.norm() - 2.0 * PI * 0.3).abs() < 1e-3);
    }

    #[test]
    fn coarse_quadrature_step_aborts() {
        let bump = TestDistribution::SmoothBump {
            center: vec![0.0],
            radius: 0.5,
            step: 0.2,
        };
        let u = PhaseSpacePoint::new(vec![0.0], vec![1.0]).unwrap();
        assert!(matches!(bump.pairing(&u, 50.0), Err(GeoError::QuadratureStep { .. })));
    }

    #[test]
    fn translation_equivariance() {
        let u = PhaseSpacePoint::new(vec![0.35, -0.1], vec![0.8, 0.6]).unwrap();
        let v = PhaseSpacePoint::new(vec![0.45, 0.1], vec![0.8, 0.6]).unwrap();
        let a = TestDistribution::Disk {
            center: [0.0, 0.0],
            radius: 0.4,
        };
        let b = TestDistribution::Disk {
            center: [0.1, 0.2],
            radius: 0.4,
        };
        for lambda in [10.0, 50.0] {
            let (x, y) = (a.pairing(&u, lambda).unwrap().norm(), b.pairing(&v, lambda).unwrap().norm());
            assert!((x - y).abs() <= 1e-9 * x.max(1e-30));
        }
    }

    #[test]
    fn config_round_trip() {
        let c: DistributionConfig = serde_json::from_str(r#"{"kind": "interval", "a": -1, "b": 1}"#).unwrap();
        assert!(matches!(c.build().unwrap(), TestDistribution::Interval { .. }));
        assert!(serde_json::from_str::<DistributionConfig>(r#"{"kind": "disk", "center": [0,0], "radius": 1, "x": 0}"#).is_err());
        let bad: DistributionConfig = serde_json::from_str(r#"{"kind": "interval", "a": 1, "b": -1}"#).unwrap();
        assert!(matches!(bad.build(), Err(GeoError::Config(_))));
    }
}
