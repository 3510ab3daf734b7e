//! Analytic conformal metrics `g = e^{2φ} I` on the closed unit disk.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::expr::{Bindings, Expr, Var};

pub type Point = Vector2<f64>;

/// Slack allowed when checking that a point is in the closed disk.
pub const DISK_SLACK: f64 = 1e-9;

/// Boundary defining function `ρ(x) = 1 − |x|²`, positive inside.
#[inline]
pub fn rho(x: &Point) -> f64 {
    1.0 - x.norm_squared()
}

/// JSON form of a metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricConfig {
    Euclidean {},
    Conformal { amplitude: f64, center: [f64; 2], width: f64 },
    Expr { phi: String },
}

#[derive(Clone, Debug)]
enum Factor {
    Flat,
    Bump { amplitude: f64, center: Point, width: f64 },
    Expr { phi: Expr, grad: [Expr; 2], hess: [[Expr; 2]; 2] },
}

/// A metric field on the unit disk. Every built-in family is conformal, so
/// the log conformal factor `φ` and its first two derivatives are available
/// in closed form.
#[derive(Clone, Debug)]
pub struct MetricField {
    factor: Factor,
    config: MetricConfig,
}

impl MetricField {
    pub fn euclidean() -> Self {
        MetricField {
            factor: Factor::Flat,
            config: MetricConfig::Euclidean {},
        }
    }

    /// `φ(x) = a·exp(−|x − c|²/w²)`.
    pub fn conformal_bump(amplitude: f64, center: [f64; 2], width: f64) -> Result<Self> {
        if !(width > 0.0) || !amplitude.is_finite() {
            return Err(GeoError::InvalidArgument(format!(
                "conformal bump needs finite amplitude and width > 0 (got a={amplitude}, w={width})"
            )));
        }
        Ok(MetricField {
            factor: Factor::Bump {
                amplitude,
                center: Point::new(center[0], center[1]),
                width,
            },
            config: MetricConfig::Conformal { amplitude, center, width },
        })
    }

    /// Conformal metric with a user-supplied `φ(x1, x2)`.
    pub fn from_phi(source: &str) -> Result<Self> {
        let phi = Expr::parse(source)?;
        if !phi.is_real() {
            return Err(GeoError::Expr("conformal factor must be real".into()));
        }
        for var in [Var::Beta, Var::Alpha, Var::V1, Var::V2] {
            if phi.uses(var) {
                return Err(GeoError::Expr(format!("conformal factor may only depend on x1, x2 (`{source}`)")));
            }
        }
        let d1 = phi.derivative(Var::X1);
        let d2 = phi.derivative(Var::X2);
        let hess = [
            [d1.derivative(Var::X1), d1.derivative(Var::X2)],
            [d2.derivative(Var::X1), d2.derivative(Var::X2)],
        ];
        Ok(MetricField {
            factor: Factor::Expr { phi, grad: [d1, d2], hess },
            config: MetricConfig::Expr { phi: source.to_string() },
        })
    }

    pub fn from_config(config: &MetricConfig) -> Result<Self> {
        match config {
            MetricConfig::Euclidean {} => Ok(Self::euclidean()),
            MetricConfig::Conformal { amplitude, center, width } => Self::conformal_bump(*amplitude, *center, *width),
            MetricConfig::Expr { phi } => Self::from_phi(phi),
        }
    }

    pub fn config(&self) -> &MetricConfig {
        &self.config
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.factor, Factor::Flat)
    }

    /// Log conformal factor φ.
    pub fn phi(&self, x: &Point) -> f64 {
        match &self.factor {
            Factor::Flat => 0.0,
            Factor::Bump { amplitude, center, width } => amplitude * (-(x - center).norm_squared() / (width * width)).exp(),
            Factor::Expr { phi, .. } => phi.eval_real(&Bindings::at([x.x, x.y])),
        }
    }

    pub fn grad_phi(&self, x: &Point) -> Vector2<f64> {
        match &self.factor {
            Factor::Flat => Vector2::zeros(),
            Factor::Bump { center, width, .. } => {
                let p = self.phi(x);
                (x - center) * (-2.0 * p / (width * width))
            }
            Factor::Expr { grad, .. } => {
                let b = Bindings::at([x.x, x.y]);
                Vector2::new(grad[0].eval_real(&b), grad[1].eval_real(&b))
            }
        }
    }

    pub fn hessian_phi(&self, x: &Point) -> Matrix2<f64> {
        match &self.factor {
            Factor::Flat => Matrix2::zeros(),
            Factor::Bump { center, width, .. } => {
                let p = self.phi(x);
                let d = x - center;
                let w2 = width * width;
                (d * d.transpose()) * (4.0 * p / (w2 * w2)) - Matrix2::identity() * (2.0 * p / w2)
            }
            Factor::Expr { hess, .. } => {
                let b = Bindings::at([x.x, x.y]);
                Matrix2::new(
                    hess[0][0].eval_real(&b),
                    hess[0][1].eval_real(&b),
                    hess[1][0].eval_real(&b),
                    hess[1][1].eval_real(&b),
                )
            }
        }
    }

    /// `g(x)` without the domain check; integrators evaluate marginally
    /// outside the disk during the final step.
    pub fn g_unchecked(&self, x: &Point) -> Matrix2<f64> {
        Matrix2::identity() * (2.0 * self.phi(x)).exp()
    }

    /// First partials `[∂₁g, ∂₂g]`.
    pub fn dg_unchecked(&self, x: &Point) -> [Matrix2<f64>; 2] {
        let s = (2.0 * self.phi(x)).exp();
        let d = self.grad_phi(x);
        [Matrix2::identity() * (2.0 * d.x * s), Matrix2::identity() * (2.0 * d.y * s)]
    }

    /// Gauss curvature `K = −e^{−2φ} Δφ`.
    pub fn gauss_curvature(&self, x: &Point) -> f64 {
        let h = self.hessian_phi(x);
        -(-2.0 * self.phi(x)).exp() * (h[(0, 0)] + h[(1, 1)])
    }

    /// `|v|²_g` at `x`.
    pub fn norm2(&self, x: &Point, v: &Vector2<f64>) -> f64 {
        (v.transpose() * self.g_unchecked(x) * v)[(0, 0)]
    }

    pub fn inner(&self, x: &Point, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
        (a.transpose() * self.g_unchecked(x) * b)[(0, 0)]
    }
}

fn check_domain(x: &Point) -> Result<()> {
    if !(x.norm_squared() <= (1.0 + DISK_SLACK) * (1.0 + DISK_SLACK)) {
        return Err(GeoError::Domain(x.x, x.y));
    }
    Ok(())
}

/// `g(x)` for a point of the closed disk.
pub fn metric_eval(metric: &MetricField, x: &Point) -> Result<Matrix2<f64>> {
    check_domain(x)?;
    Ok(metric.g_unchecked(x))
}

/// Christoffel symbols, indexed `[k][i][j]` for `Γ^k_{ij}`.
pub type Christoffel = [[[f64; 2]; 2]; 2];

/// Christoffel symbols from `g` and `∂g` by
/// `Γ^k_{ij} = ½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`.
pub fn christoffel_unchecked(metric: &MetricField, x: &Point) -> Result<Christoffel> {
    let g = metric.g_unchecked(x);
    let ginv = g
        .try_inverse()
        .ok_or_else(|| GeoError::Numeric(format!("metric not invertible at ({}, {})", x.x, x.y)))?;
    let dg = metric.dg_unchecked(x);
    let mut gamma = [[[0.0; 2]; 2]; 2];
    for (k, gk) in gamma.iter_mut().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.0;
                for l in 0..2 {
                    acc += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                }
                gk[i][j] = 0.5 * acc;
            }
        }
    }
    Ok(gamma)
}

pub fn christoffel(metric: &MetricField, x: &Point) -> Result<Christoffel> {
    check_domain(x)?;
    christoffel_unchecked(metric, x)
}

/// `Γ(a, b)^k = Γ^k_{ij} a^i b^j`.
#[inline]
pub fn contract(gamma: &Christoffel, a: &Vector2<f64>, b: &Vector2<f64>) -> Vector2<f64> {
    let mut out = Vector2::zeros();
    for k in 0..2 {
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += gamma[k][i][j] * a[i] * b[j];
            }
        }
        out[k] = acc;
    }
    out
}

/// Gauss curvature from centered differences of the Christoffel symbols,
/// `K = R_{1212} / det g`. Works for any metric with derivative access; for
/// the built-in conformal families [`MetricField::gauss_curvature`] is exact.
pub fn gauss_curvature_fd(metric: &MetricField, x: &Point, step: f64) -> Result<f64> {
    let gamma = christoffel_unchecked(metric, x)?;
    let mut dgamma = [[[[0.0; 2]; 2]; 2]; 2];
    for (m, dm) in dgamma.iter_mut().enumerate() {
        let mut e = Vector2::zeros();
        e[m] = step;
        let hi = christoffel_unchecked(metric, &(x + e))?;
        let lo = christoffel_unchecked(metric, &(x - e))?;
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    dm[k][i][j] = (hi[k][i][j] - lo[k][i][j]) / (2.0 * step);
                }
            }
        }
    }
    // R^l_{ijk} = ∂_j Γ^l_{ik} − ∂_k Γ^l_{ij} + Γ^l_{jm}Γ^m_{ik} − Γ^l_{km}Γ^m_{ij}
    let riemann_up = |l: usize, i: usize, j: usize, k: usize| {
        let mut r = dgamma[j][l][i][k] - dgamma[k][l][i][j];
        for m in 0..2 {
            r += gamma[l][j][m] * gamma[m][i][k] - gamma[l][k][m] * gamma[m][i][j];
        }
        r
    };
    let g = metric.g_unchecked(x);
    // R_{1212} = g_{1l} R^l_{212}
    let r1212: f64 = (0..2).map(|l| g[(0, l)] * riemann_up(l, 1, 0, 1)).sum();
    Ok(r1212 / g.determinant())
}
