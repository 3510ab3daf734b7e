use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{vec_row_major, FieldPoint, MatrixField};
use crate::discrete::PixelBasis;
use crate::error::{GeoError, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::geometry::Point;

type SourceFn = dyn Fn(&Point) -> Vec<Complex64> + Send + Sync;

#[derive(Clone)]
pub struct CustomSource {
    pub n: usize,
    pub interior_supported: bool,
    pub f: Arc<SourceFn>,
}

impl fmt::Debug for CustomSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSource")
            .field("n", &self.n)
            .field("interior_supported", &self.interior_supported)
            .finish_non_exhaustive()
    }
}

/// Position-only source `f(x) ∈ ℂᴺ`.
#[derive(Clone, Debug)]
pub enum VectorSource {
    Constant(Vec<Complex64>),
    /// One expression in `x1, x2` per component.
    Expr(Vec<Expr>),
    /// Bilinear pixel field with pixel-major coefficients `coeffs[col·n + comp]`.
    Grid {
        basis: Arc<PixelBasis>,
        n: usize,
        coeffs: Vec<Complex64>,
    },
    /// Row-major `vec` of a matrix field; size `N²`.
    Vectorized(MatrixField),
    Custom(CustomSource),
}

impl VectorSource {
    pub fn zero(n: usize) -> Self {
        VectorSource::Constant(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn ones(n: usize) -> Self {
        VectorSource::Constant(vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn expr(components: &[&str]) -> Result<Self> {
        let exprs = components.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        Self::from_exprs(exprs)
    }

    fn from_exprs(exprs: Vec<Expr>) -> Result<Self> {
        if exprs.is_empty() {
            return Err(GeoError::Config("source needs at least one component".into()));
        }
        for e in &exprs {
            if [Var::Beta, Var::Alpha, Var::V1, Var::V2].iter().any(|v| e.uses(*v)) {
                return Err(GeoError::Config(format!(
                    "source component `{}` must depend on x1, x2 only",
                    e.source()
                )));
            }
        }
        Ok(VectorSource::Expr(exprs))
    }

    pub fn grid(basis: Arc<PixelBasis>, n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != basis.len() * n {
            return Err(GeoError::SizeMismatch {
                expected: basis.len() * n,
                found: coeffs.len(),
            });
        }
        Ok(VectorSource::Grid { basis, n, coeffs })
    }

    /// `f(x) = a·exp(−|x − c|²/w²)` in every component.
    pub fn gaussian(n: usize, amplitude: f64, center: [f64; 2], width: f64) -> Self {
        let c = Point::new(center[0], center[1]);
        VectorSource::Custom(CustomSource {
            n,
            interior_supported: false,
            f: Arc::new(move |x: &Point| {
                let v = amplitude * (-(x - c).norm_squared() / (width * width)).exp();
                vec![Complex64::new(v, 0.0); n]
            }),
        })
    }

    /// `a·exp(1 − 1/(1 − |x − c|²/R²))` inside the disk of radius `R`
    /// around `c`, zero outside: smooth with compact support, peak `a`.
    pub fn smooth_bump(n: usize, amplitude: f64, center: [f64; 2], radius: f64) -> Self {
        let c = Point::new(center[0], center[1]);
        let inside = c.norm() + radius < 1.0;
        VectorSource::Custom(CustomSource {
            n,
            interior_supported: inside,
            f: Arc::new(move |x: &Point| {
                let s = (x - c).norm_squared() / (radius * radius);
                let v = if s < 1.0 { amplitude * (1.0 - 1.0 / (1.0 - s)).exp() } else { 0.0 };
                vec![Complex64::new(v, 0.0); n]
            }),
        })
    }

    pub fn size(&self) -> usize {
        match self {
            VectorSource::Constant(v) => v.len(),
            VectorSource::Expr(e) => e.len(),
            VectorSource::Grid { n, .. } => *n,
            VectorSource::Vectorized(m) => m.size() * m.size(),
            VectorSource::Custom(c) => c.n,
        }
    }

    /// Pixel fields vanish near the boundary by construction.
    pub fn is_interior_supported(&self) -> bool {
        match self {
            VectorSource::Constant(v) => v.iter().all(|c| c.norm() == 0.0),
            VectorSource::Grid { .. } => true,
            VectorSource::Custom(c) => c.interior_supported,
            VectorSource::Expr(_) | VectorSource::Vectorized(_) => false,
        }
    }

    pub fn eval(&self, x: &Point) -> Vec<Complex64> {
        match self {
            VectorSource::Constant(v) => v.clone(),
            VectorSource::Expr(e) => {
                let b = Bindings::at([x.x, x.y]);
                e.iter().map(|e| e.eval(&b)).collect()
            }
            VectorSource::Grid { basis, n, coeffs } => basis.interpolate(coeffs, *n, x),
            VectorSource::Vectorized(m) => vec_row_major(&m.eval(&FieldPoint::at(*x))),
            VectorSource::Custom(c) => (c.f)(x),
        }
    }

    /// Pixel-major coefficients of this source sampled at the centers of `basis`.
    pub fn project(&self, basis: &PixelBasis) -> Vec<Complex64> {
        basis.project(self.size(), |x| self.eval(x))
    }
}

/// JSON form of a phantom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SourceConfig {
    Constant {
        values: Vec<f64>,
    },
    Expr {
        components: Vec<String>,
    },
    Gaussian {
        n: usize,
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
    Bump {
        n: usize,
        amplitude: f64,
        center: [f64; 2],
        radius: f64,
    },
}

impl SourceConfig {
    pub fn size(&self) -> usize {
        match self {
            SourceConfig::Constant { values } => values.len(),
            SourceConfig::Expr { components } => components.len(),
            SourceConfig::Gaussian { n, .. } | SourceConfig::Bump { n, .. } => *n,
        }
    }

    pub fn build(&self) -> Result<VectorSource> {
        match self {
            SourceConfig::Constant { values } if values.is_empty() => {
                Err(GeoError::Config("constant source needs at least one value".into()))
            }
            SourceConfig::Constant { values } => Ok(VectorSource::Constant(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())),
            SourceConfig::Expr { components } => {
                let exprs = components.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
                VectorSource::from_exprs(exprs)
            }
            SourceConfig::Gaussian {
                n,
                amplitude,
                center,
                width,
            } => {
                if *n == 0 || !(*width > 0.0) {
                    return Err(GeoError::Config("gaussian source needs n ≥ 1 and width > 0".into()));
                }
                Ok(VectorSource::gaussian(*n, *amplitude, *center, *width))
            }
            SourceConfig::Bump {
                n,
                amplitude,
                center,
                radius,
            } => {
                if *n == 0 || !(*radius > 0.0) {
                    return Err(GeoError::Config("bump source needs n ≥ 1 and radius > 0".into()));
                }
                Ok(VectorSource::smooth_bump(*n, *amplitude, *center, *radius))
            }
        }
    }
}
