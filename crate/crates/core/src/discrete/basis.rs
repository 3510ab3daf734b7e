use num_complex::Complex64;
use serde::Serialize;

use crate::error::{GeoError, Result};
use crate::geometry::Point;

/// Bilinear hat functions centred at the pixels of an `m×m` grid over
/// `[−1, 1]²`. A pixel is kept when its center satisfies `|c| < 1 − δ` and
/// its whole hat support `c + [−h, h]²` stays inside the open disk.
#[derive(Clone, Debug, Serialize)]
pub struct PixelBasis {
    m: usize,
    delta: f64,
    h: f64,
    /// Grid index `iy·m + ix` of each column.
    cells: Vec<usize>,
    #[serde(skip)]
    lookup: Vec<Option<u32>>,
}

/// Up to four `(column, weight)` pairs.
#[derive(Clone, Copy, Debug, Default)]
pub struct Stencil {
    items: [(usize, f64); 4],
    len: usize,
}

impl Stencil {
    pub fn as_slice(&self) -> &[(usize, f64)] {
        &self.items[..self.len]
    }
}

impl IntoIterator for Stencil {
    type Item = (usize, f64);
    type IntoIter = std::iter::Take<std::array::IntoIter<(usize, f64), 4>>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.into_iter().take(self.len)
    }
}

impl PixelBasis {
    /// Default support margin `δ = 2/m`.
    pub fn new(m: usize) -> Result<Self> {
        Self::with_margin(m, 2.0 / m.max(1) as f64)
    }

    pub fn with_margin(m: usize, delta: f64) -> Result<Self> {
        Self::with_mask(m, delta, |_| true)
    }

    /// Like [`PixelBasis::with_margin`], additionally keeping only pixels
    /// whose center passes `keep`.
    pub fn with_mask(m: usize, delta: f64, keep: impl Fn(&Point) -> bool) -> Result<Self> {
        if m < 2 {
            return Err(GeoError::InvalidArgument(format!("grid size must be at least 2, got {m}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(GeoError::InvalidArgument(format!("support margin must lie in [0, 1), got {delta}")));
        }
        let h = 2.0 / m as f64;
        let reach = std::f64::consts::SQRT_2 * h;
        let mut cells = Vec::new();
        let mut lookup = vec![None; m * m];
        for iy in 0..m {
            for ix in 0..m {
                let c = Self::grid_center(h, ix, iy);
                let r = c.norm();
                if r < 1.0 - delta && r + reach < 1.0 && keep(&c) {
                    lookup[iy * m + ix] = Some(cells.len() as u32);
                    cells.push(iy * m + ix);
                }
            }
        }
        if cells.is_empty() {
            return Err(GeoError::InvalidArgument(format!(
                "pixel mask is empty for m = {m}, margin {delta}"
            )));
        }
        Ok(PixelBasis {
            m,
            delta,
            h,
            cells,
            lookup,
        })
    }

    fn grid_center(h: f64, ix: usize, iy: usize) -> Point {
        Point::new(-1.0 + (ix as f64 + 0.5) * h, -1.0 + (iy as f64 + 0.5) * h)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn margin(&self) -> f64 {
        self.delta
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn center(&self, col: usize) -> Point {
        let cell = self.cells[col];
        Self::grid_center(self.h, cell % self.m, cell / self.m)
    }

    pub fn centers(&self) -> Vec<Point> {
        (0..self.len()).map(|c| self.center(c)).collect()
    }

    /// Column of grid cell `(ix, iy)`, if masked in.
    pub fn column(&self, ix: usize, iy: usize) -> Option<usize> {
        if ix >= self.m || iy >= self.m {
            return None;
        }
        self.lookup[iy * self.m + ix].map(|c| c as usize)
    }

    /// Basis functions that are nonzero at `x` and their values.
    pub fn stencil(&self, x: &Point) -> Stencil {
        let mut s = Stencil::default();
        let gx = (x.x + 1.0) / self.h - 0.5;
        let gy = (x.y + 1.0) / self.h - 0.5;
        let (fx, fy) = (gx.floor(), gy.floor());
        let (tx, ty) = (gx - fx, gy - fy);
        for (dx, wx) in [(0i64, 1.0 - tx), (1, tx)] {
            for (dy, wy) in [(0i64, 1.0 - ty), (1, ty)] {
                let w = wx * wy;
                let (ix, iy) = (fx as i64 + dx, fy as i64 + dy);
                if w == 0.0 || ix < 0 || iy < 0 {
                    continue;
                }
                if let Some(col) = self.column(ix as usize, iy as usize) {
                    s.items[s.len] = (col, w);
                    s.len += 1;
                }
            }
        }
        s
    }

    /// Evaluates the `n`-component field with pixel-major coefficients
    /// `coeffs[col·n + comp]` at `x`.
    pub fn interpolate(&self, coeffs: &[Complex64], n: usize, x: &Point) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (col, w) in self.stencil(x) {
            for (c, o) in out.iter_mut().enumerate() {
                *o += coeffs[col * n + c] * w;
            }
        }
        out
    }

    /// Pixel-major coefficients of `f` sampled at pixel centers.
    pub fn project(&self, n: usize, f: impl Fn(&Point) -> Vec<Complex64>) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.len() * n);
        for col in 0..self.len() {
            let v = f(&self.center(col));
            debug_assert_eq!(v.len(), n);
            out.extend_from_slice(&v);
        }
        out
    }
}
