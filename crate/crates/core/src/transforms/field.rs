//! Matrix-valued fields evaluated along geodesics.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::discrete::PixelBasis;
use crate::error::{GeoError, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::geometry::{InfluxPoint, PathSample, Point};

pub type CMat = DMatrix<Complex64>;

/// Determinant modulus below which a matrix counts as singular.
pub const SINGULAR_DET: f64 = 1e-12;

/// Where a field is evaluated: the influx point labelling the geodesic and
/// the current state `(x, v)` on it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldPoint {
    pub beta: f64,
    pub alpha: f64,
    pub x: Point,
    pub v: Vector2<f64>,
}

impl FieldPoint {
    pub fn on_ray(z: &InfluxPoint, s: &PathSample) -> Self {
        FieldPoint {
            beta: z.beta,
            alpha: z.alpha,
            x: s.x,
            v: s.v,
        }
    }

    pub fn at(x: Point) -> Self {
        FieldPoint {
            beta: 0.0,
            alpha: 0.0,
            x,
            v: Vector2::zeros(),
        }
    }

    pub fn bindings(&self) -> Bindings {
        Bindings {
            x: [self.x.x, self.x.y],
            beta: self.beta,
            alpha: self.alpha,
            v: [self.v.x, self.v.y],
        }
    }
}

/// Square matrix of expressions, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprMatrix {
    n: usize,
    entries: Vec<Expr>,
}

impl ExprMatrix {
    pub fn parse(rows: &[Vec<String>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(GeoError::Config("matrix expression needs at least one row".into()));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GeoError::Config(format!(
                    "matrix expression row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for src in row {
                entries.push(Expr::parse(src)?);
            }
        }
        Ok(ExprMatrix { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sources(&self) -> Vec<Vec<String>> {
        self.entries
            .chunks(self.n)
            .map(|row| row.iter().map(|e| e.source().to_string()).collect())
            .collect()
    }

    pub fn eval(&self, p: &FieldPoint) -> CMat {
        let b = p.bindings();
        CMat::from_fn(self.n, self.n, |i, j| self.entries[i * self.n + j].eval(&b))
    }

    pub fn uses(&self, var: Var) -> bool {
        self.entries.iter().any(|e| e.uses(var))
    }
}

/// Matrix field on a pixel grid, bilinearly interpolated. Coefficients are
/// stored pixel-major, each pixel holding a row-major `n×n` block.
#[derive(Clone, Debug)]
pub struct GridMatrixField {
    pub basis: Arc<PixelBasis>,
    pub n: usize,
    pub coeffs: Vec<Complex64>,
}

impl GridMatrixField {
    pub fn new(basis: Arc<PixelBasis>, n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        let want = basis.len() * n * n;
        if coeffs.len() != want {
            return Err(GeoError::SizeMismatch {
                expected: want,
                found: coeffs.len(),
            });
        }
        Ok(GridMatrixField { basis, n, coeffs })
    }

    pub fn zeros(basis: Arc<PixelBasis>, n: usize) -> Self {
        let len = basis.len() * n * n;
        GridMatrixField {
            basis,
            n,
            coeffs: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    /// Samples `f` at pixel centers.
    pub fn sample(basis: Arc<PixelBasis>, n: usize, f: impl Fn(&Point) -> CMat) -> Self {
        let mut coeffs = Vec::with_capacity(basis.len() * n * n);
        for col in 0..basis.len() {
            let m = f(&basis.center(col));
            for i in 0..n {
                for j in 0..n {
                    coeffs.push(m[(i, j)]);
                }
            }
        }
        GridMatrixField { basis, n, coeffs }
    }

    pub fn eval(&self, x: &Point) -> CMat {
        let nn = self.n * self.n;
        let mut out = CMat::zeros(self.n, self.n);
        for (col, w) in self.basis.stencil(x) {
            let block = &self.coeffs[col * nn..(col + 1) * nn];
            for i in 0..self.n {
                for j in 0..self.n {
                    out[(i, j)] += block[i * self.n + j] * w;
                }
            }
        }
        out
    }
}

type FieldFn = dyn Fn(&FieldPoint) -> CMat + Send + Sync;

/// A field given by a closure, for programmatic use.
#[derive(Clone)]
pub struct CustomField {
    pub n: usize,
    pub analytic: bool,
    pub f: Arc<FieldFn>,
}

impl fmt::Debug for CustomField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomField")
            .field("n", &self.n)
            .field("analytic", &self.analytic)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
pub enum MatrixField {
    Identity(usize),
    Zero(usize),
    Constant(CMat),
    Expr(ExprMatrix),
    /// `exp(M)` of an expression matrix; invertible everywhere.
    Exp(ExprMatrix),
    Grid(GridMatrixField),
    /// `U ↦ A U − U B` on row-major vectorized `N×N` matrices.
    KroneckerSum(Box<MatrixField>, Box<MatrixField>),
    Difference(Box<MatrixField>, Box<MatrixField>),
    Custom(CustomField),
}

impl MatrixField {
    pub fn size(&self) -> usize {
        match self {
            MatrixField::Identity(n) | MatrixField::Zero(n) => *n,
            MatrixField::Constant(m) => m.nrows(),
            MatrixField::Expr(e) | MatrixField::Exp(e) => e.n(),
            MatrixField::Grid(g) => g.n,
            MatrixField::KroneckerSum(a, _) => a.size() * a.size(),
            MatrixField::Difference(a, _) => a.size(),
            MatrixField::Custom(c) => c.n,
        }
    }

    pub fn eval(&self, p: &FieldPoint) -> CMat {
        match self {
            MatrixField::Identity(n) => CMat::identity(*n, *n),
            MatrixField::Zero(n) => CMat::zeros(*n, *n),
            MatrixField::Constant(m) => m.clone(),
            MatrixField::Expr(e) => e.eval(p),
            MatrixField::Exp(e) => expm(&e.eval(p)),
            MatrixField::Grid(g) => g.eval(&p.x),
            MatrixField::KroneckerSum(a, b) => kronecker_sum(&a.eval(p), &b.eval(p)),
            MatrixField::Difference(a, b) => a.eval(p) - b.eval(p),
            MatrixField::Custom(c) => (c.f)(p),
        }
    }

    /// Whether the field is real-analytic in `(β, α, x)`. Pixel fields are only
    /// piecewise polynomial.
    pub fn is_analytic(&self) -> bool {
        match self {
            MatrixField::Identity(_) | MatrixField::Zero(_) | MatrixField::Constant(_) | MatrixField::Expr(_) | MatrixField::Exp(_) => true,
            MatrixField::Grid(_) => false,
            MatrixField::KroneckerSum(a, b) | MatrixField::Difference(a, b) => a.is_analytic() && b.is_analytic(),
            MatrixField::Custom(c) => c.analytic,
        }
    }

    /// Whether the field depends on the position only (a Higgs field).
    pub fn is_position_only(&self) -> bool {
        match self {
            MatrixField::Identity(_) | MatrixField::Zero(_) | MatrixField::Constant(_) | MatrixField::Grid(_) => true,
            MatrixField::Expr(e) | MatrixField::Exp(e) => ![Var::Beta, Var::Alpha, Var::V1, Var::V2].iter().any(|v| e.uses(*v)),
            MatrixField::KroneckerSum(a, b) | MatrixField::Difference(a, b) => a.is_position_only() && b.is_position_only(),
            MatrixField::Custom(_) => false,
        }
    }
}

/// JSON form of a matrix field: `{"kind": "identity", "n": N}` or
/// `{"kind": "expr" | "exp", "n": N, "entries": [["<expr>", ...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MatrixFieldConfig {
    Identity { n: usize },
    Zero { n: usize },
    Expr { n: usize, entries: Vec<Vec<String>> },
    Exp { n: usize, entries: Vec<Vec<String>> },
}

impl MatrixFieldConfig {
    pub fn build(&self) -> Result<MatrixField> {
        let checked = |n: usize, entries: &[Vec<String>]| -> Result<ExprMatrix> {
            let m = ExprMatrix::parse(entries)?;
            if m.n() != n {
                return Err(GeoError::Config(format!(
                    "declared n = {n} but entries form a {}x{} matrix",
                    m.n(),
                    m.n()
                )));
            }
            Ok(m)
        };
        match self {
            MatrixFieldConfig::Identity { n } | MatrixFieldConfig::Zero { n } if *n == 0 => {
                Err(GeoError::Config("n must be at least 1".into()))
            }
            MatrixFieldConfig::Identity { n } => Ok(MatrixField::Identity(*n)),
            MatrixFieldConfig::Zero { n } => Ok(MatrixField::Zero(*n)),
            MatrixFieldConfig::Expr { n, entries } => Ok(MatrixField::Expr(checked(*n, entries)?)),
            MatrixFieldConfig::Exp { n, entries } => Ok(MatrixField::Exp(checked(*n, entries)?)),
        }
    }
}

/// `A ⊗ I − I ⊗ Bᵀ`, the matrix of `U ↦ A U − U B` on row-major `vec(U)`.
pub fn kronecker_sum(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let nn = n * n;
    let mut out = CMat::zeros(nn, nn);
    for i in 0..n {
        for j in 0..n {
            let row = i * n + j;
            for k in 0..n {
                out[(row, k * n + j)] += a[(i, k)];
                out[(row, i * n + k)] -= b[(k, j)];
            }
        }
    }
    out
}

/// Row-major vectorization.
pub fn vec_row_major(m: &CMat) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unvec_row_major(v: &[Complex64], n: usize) -> CMat {
    CMat::from_fn(n, n, |i, j| v[i * n + j])
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let norm: f64 = m.iter().map(|z| z.norm()).sum::<f64>().max(0.0);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = m * Complex64::new(scale, 0.0);
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..=20 {
        term = &term * &a * Complex64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn determinant(m: &CMat) -> Complex64 {
    match m.nrows() {
        0 => Complex64::new(1.0, 0.0),
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        3 => {
            m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)]) - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
                + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
        }
        _ => m.clone().lu().determinant(),
    }
}

/// Inverse with the singularity threshold `|det| < 1e-12`. Closed forms for
/// `n ≤ 3`, LU with partial pivoting otherwise.
pub fn invert(m: &CMat) -> Result<CMat> {
    let n = m.nrows();
    let det = determinant(m);
    if !(det.norm() >= SINGULAR_DET) {
        return Err(GeoError::WeightSingular { det: det.norm() });
    }
    let inv = match n {
        1 => CMat::from_element(1, 1, Complex64::new(1.0, 0.0) / det),
        2 => {
            let d = Complex64::new(1.0, 0.0) / det;
            CMat::from_row_slice(2, 2, &[m[(1, 1)] * d, -m[(0, 1)] * d, -m[(1, 0)] * d, m[(0, 0)] * d])
        }
        3 => {
            let d = Complex64::new(1.0, 0.0) / det;
            let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)];
            CMat::from_row_slice(
                3,
                3,
                &[
                    c(1, 2, 1, 2) * d,
                    -c(0, 2, 1, 2) * d,
                    c(0, 1, 1, 2) * d,
                    -c(1, 2, 0, 2) * d,
                    c(0, 2, 0, 2) * d,
                    -c(0, 1, 0, 2) * d,
                    c(1, 2, 0, 1) * d,
                    -c(0, 2, 0, 1) * d,
                    c(0, 1, 0, 1) * d,
                ],
            )
        }
        _ => m.clone().lu().try_inverse().ok_or(GeoError::WeightSingular { det: det.norm() })?,
    };
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn closed_form_inverses_match_lu() {
        let m3 = CMat::from_row_slice(
            3,
            3,
            &[
                c(2.0),
                c(0.5),
                Complex64::new(0.1, 0.3),
                c(-1.0),
                c(3.0),
                c(0.2),
                c(0.0),
                c(0.7),
                c(1.5),
            ],
        );
        let inv = invert(&m3).unwrap();
        assert!((&m3 * &inv - CMat::identity(3, 3)).norm() < 1e-14);
        let lu = m3.clone().lu().try_inverse().unwrap();
        assert!((inv - lu).norm() < 1e-13);
        let m4 = CMat::from_fn(4, 4, |i, j| c(if i == j { 3.0 } else { 0.3 * (i as f64 - j as f64) }));
        let inv4 = invert(&m4).unwrap();
        assert!((&m4 * &inv4 - CMat::identity(4, 4)).norm() < 1e-13);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(4.0)]);
        assert!(matches!(invert(&m), Err(GeoError::WeightSingular { .. })));
    }

    #[test]
    fn expm_of_nilpotent_and_diagonal() {
        let n = CMat::from_row_slice(2, 2, &[c(0.0), c(1.5), c(0.0), c(0.0)]);
        let e = expm(&n);
        assert!((e - CMat::from_row_slice(2, 2, &[c(1.0), c(1.5), c(0.0), c(1.0)])).norm() < 1e-15);
        let d = CMat::from_row_slice(2, 2, &[c(2.0), c(0.0), c(0.0), c(-3.0)]);
        let e = expm(&d);
        assert!((e[(0, 0)].re - 2f64.exp()).abs() < 1e-13 && (e[(1, 1)].re - (-3f64).exp()).abs() < 1e-15);
        // det exp(M) = exp(tr M)
        let m = CMat::from_row_slice(2, 2, &[c(0.3), c(-1.2), Complex64::new(0.4, 0.2), c(0.1)]);
        let lhs = determinant(&expm(&m));
        let rhs = (m[(0, 0)] + m[(1, 1)]).exp();
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn kronecker_sum_acts_as_commutator_like_map() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(-0.5), Complex64::new(0.0, 1.0)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.3), c(0.0), c(1.1), c(-2.0)]);
        let u = CMat::from_row_slice(2, 2, &[c(0.7), c(-0.1), c(0.2), c(0.9)]);
        let e = kronecker_sum(&a, &b);
        let lhs = unvec_row_major((&e * nalgebra::DVector::from_vec(vec_row_major(&u))).as_slice(), 2);
        let rhs = &a * &u - &u * &b;
        assert!((lhs - rhs).norm() < 1e-15);
        // applied to the identity it gives A − B
        let id = CMat::identity(2, 2);
        let on_id = unvec_row_major((&e * nalgebra::DVector::from_vec(vec_row_major(&id))).as_slice(), 2);
        assert!((on_id - (&a - &b)).norm() < 1e-15);
    }

    #[test]
    fn config_schema() {
        let cfg: MatrixFieldConfig =
            serde_json::from_str(r#"{"kind": "expr", "n": 2, "entries": [["1", "x1"], ["0", "exp(beta)"]]}"#).unwrap();
        let f = cfg.build().unwrap();
        assert_eq!(f.size(), 2);
        assert!(!f.is_position_only() && f.is_analytic());
        let bad: MatrixFieldConfig = serde_json::from_str(r#"{"kind": "expr", "n": 3, "entries": [["1", "x1"], ["0", "1"]]}"#).unwrap();
        assert!(bad.build().is_err());
        assert!(serde_json::from_str::<MatrixFieldConfig>(r#"{"kind": "identity", "n": 2, "extra": 1}"#).is_err());
    }
}
