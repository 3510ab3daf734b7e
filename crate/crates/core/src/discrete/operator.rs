use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::PixelBasis;
use crate::error::{GeoError, Result};
use crate::geometry::{trace_influx, InfluxPoint, MetricField};
use crate::io::sha256_hex;
use crate::transforms::{weight_on_path, CMat, MatrixWeight, PathQuadrature};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative column norm below which a pixel counts as unseen by the fan.
pub const ZERO_COLUMN_TOL: f64 = 1e-12;

/// Dense matrix of the weighted transform on a pixel basis. Row
/// `ray·N + i` holds component `i` of ray `ray`; column `pixel·N + c` is
/// component `c` of pixel `pixel`. Each ray also records which pixels it
/// touches so products skip structural zeros.
#[derive(Clone, Debug)]
pub struct ForwardOperator {
    n: usize,
    n_rays: usize,
    n_pixels: usize,
    data: Vec<Complex64>,
    ray_pixels: Vec<Vec<u32>>,
    hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorHeader {
    pub rows: usize,
    pub cols: usize,
    pub components: usize,
    pub rays: usize,
    pub pixels: usize,
    pub dtype: String,
    pub order: String,
    pub hash: String,
}

const MAGIC: &[u8; 4] = b"GXOP";

impl ForwardOperator {
    /// Wraps a dense row-major matrix; every pixel counts as touched.
    pub fn from_dense(n: usize, n_rays: usize, n_pixels: usize, data: Vec<Complex64>) -> Result<Self> {
        let want = n_rays * n * n_pixels * n;
        if data.len() != want || n == 0 {
            return Err(GeoError::SizeMismatch {
                expected: want,
                found: data.len(),
            });
        }
        let mut op = ForwardOperator {
            n,
            n_rays,
            n_pixels,
            data,
            ray_pixels: vec![(0..n_pixels as u32).collect(); n_rays],
            hash: String::new(),
        };
        op.hash = sha256_hex(&op.data_bytes());
        Ok(op)
    }

    pub fn rows(&self) -> usize {
        self.n_rays * self.n
    }

    pub fn cols(&self) -> usize {
        self.n_pixels * self.n
    }

    pub fn components(&self) -> usize {
        self.n
    }

    pub fn rays(&self) -> usize {
        self.n_rays
    }

    pub fn pixels(&self) -> usize {
        self.n_pixels
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols() + col]
    }

    pub fn row(&self, row: usize) -> &[Complex64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    /// Pixels touched by `ray`, ascending.
    pub fn ray_pixels(&self, ray: usize) -> &[u32] {
        &self.ray_pixels[ray]
    }

    fn check_len(expected: usize, found: usize) -> Result<()> {
        if expected != found {
            return Err(GeoError::SizeMismatch { expected, found });
        }
        Ok(())
    }

    pub fn apply(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        Self::check_len(self.cols(), coeffs.len())?;
        let n = self.n;
        let mut out = vec![ZERO; self.rows()];
        out.par_chunks_mut(n).enumerate().for_each(|(ray, block)| {
            for (i, o) in block.iter_mut().enumerate() {
                let row = self.row(ray * n + i);
                let mut acc = ZERO;
                for &p in &self.ray_pixels[ray] {
                    let base = p as usize * n;
                    for c in 0..n {
                        acc += row[base + c] * coeffs[base + c];
                    }
                }
                *o = acc;
            }
        });
        Ok(out)
    }

    /// `Aᴴ d`.
    pub fn apply_adjoint(&self, data: &[Complex64]) -> Result<Vec<Complex64>> {
        Self::check_len(self.rows(), data.len())?;
        let n = self.n;
        let mut out = vec![ZERO; self.cols()];
        for ray in 0..self.n_rays {
            for i in 0..n {
                let d = data[ray * n + i];
                if d == ZERO {
                    continue;
                }
                let row = self.row(ray * n + i);
                for &p in &self.ray_pixels[ray] {
                    let base = p as usize * n;
                    for c in 0..n {
                        out[base + c] += row[base + c].conj() * d;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `AᴴA`, accumulated from the touched-pixel structure.
    pub fn gram(&self) -> CMat {
        let cols = self.cols();
        let n = self.n;
        let mut g = CMat::zeros(cols, cols);
        let mut idx = Vec::new();
        for ray in 0..self.n_rays {
            idx.clear();
            for &p in &self.ray_pixels[ray] {
                idx.extend((0..n).map(|c| p as usize * n + c));
            }
            for i in 0..n {
                let row = self.row(ray * n + i);
                for &a in &idx {
                    let ra = row[a].conj();
                    if ra == ZERO {
                        continue;
                    }
                    for &b in &idx {
                        g[(a, b)] += ra * row[b];
                    }
                }
            }
        }
        g
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let cols = self.cols();
        let mut sq = vec![0.0; cols];
        for r in 0..self.rows() {
            for (s, v) in sq.iter_mut().zip(self.row(r)) {
                *s += v.norm_sqr();
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Pixels whose columns all have norm ≤ `ZERO_COLUMN_TOL` times the
    /// largest column norm.
    pub fn zero_columns(&self) -> Vec<usize> {
        let norms = self.column_norms();
        let max = norms.iter().cloned().fold(0.0, f64::max);
        (0..self.n_pixels)
            .filter(|&p| (0..self.n).all(|c| norms[p * self.n + c] <= ZERO_COLUMN_TOL * max))
            .collect()
    }

    /// Sub-operator on the given rays and pixels, in the given order.
    pub fn select(&self, rays: &[usize], pixels: &[usize]) -> ForwardOperator {
        let n = self.n;
        let new_cols = pixels.len() * n;
        let mut pos = vec![u32::MAX; self.n_pixels];
        for (k, &p) in pixels.iter().enumerate() {
            pos[p] = k as u32;
        }
        let mut data = vec![ZERO; rays.len() * n * new_cols];
        let mut ray_pixels = Vec::with_capacity(rays.len());
        for (k, &ray) in rays.iter().enumerate() {
            let mut touched: Vec<u32> = self.ray_pixels[ray]
                .iter()
                .map(|&p| pos[p as usize])
                .filter(|&q| q != u32::MAX)
                .collect();
            touched.sort_unstable();
            for i in 0..n {
                let src = self.row(ray * n + i);
                let dst = &mut data[(k * n + i) * new_cols..(k * n + i + 1) * new_cols];
                for &q in &touched {
                    let p = pixels[q as usize];
                    for c in 0..n {
                        dst[q as usize * n + c] = src[p * n + c];
                    }
                }
            }
            ray_pixels.push(touched);
        }
        let hash = sha256_hex(format!("{}|{:?}|{:?}", self.hash, rays, pixels).as_bytes());
        ForwardOperator {
            n,
            n_rays: rays.len(),
            n_pixels: pixels.len(),
            data,
            ray_pixels,
            hash,
        }
    }

    /// Scatters pixel-major coefficients for a subset back into a full-length vector.
    pub fn scatter(pixels: &[usize], n: usize, sub: &[Complex64], full: &mut [Complex64]) {
        for (k, &p) in pixels.iter().enumerate() {
            full[p * n..(p + 1) * n].copy_from_slice(&sub[k * n..(k + 1) * n]);
        }
    }

    pub fn gather(pixels: &[usize], n: usize, full: &[Complex64]) -> Vec<Complex64> {
        pixels.iter().flat_map(|&p| full[p * n..(p + 1) * n].iter().copied()).collect()
    }

    fn data_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(self.data.len() * 16);
        for z in &self.data {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        bytes
    }

    pub fn header(&self) -> OperatorHeader {
        OperatorHeader {
            rows: self.rows(),
            cols: self.cols(),
            components: self.n,
            rays: self.n_rays,
            pixels: self.n_pixels,
            dtype: "complex64".into(),
            order: "row-major".into(),
            hash: self.hash.clone(),
        }
    }

    /// `GXOP`, little-endian `u64` header length, JSON header, then the
    /// matrix as row-major complex64 (two little-endian `f32` per entry).
    pub fn export(&self, w: &mut impl Write) -> Result<()> {
        let header = serde_json::to_vec(&self.header()).map_err(|e| GeoError::Numeric(e.to_string()))?;
        w.write_all(MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.cols() * 8);
        for r in 0..self.rows() {
            buf.clear();
            for z in self.row(r) {
                buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                buf.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    /// Reads back an exported operator (entries rounded to single precision).
    pub fn import(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(GeoError::InvalidArgument("not an operator file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let h: OperatorHeader = serde_json::from_slice(&header).map_err(|e| GeoError::InvalidArgument(e.to_string()))?;
        let mut raw = vec![0u8; h.rows * h.cols * 8];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| {
                let re = f32::from_le_bytes([b[0], b[1], b[2], b[3]]);
                let im = f32::from_le_bytes([b[4], b[5], b[6], b[7]]);
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        let mut op = Self::from_dense(h.components, h.rays, h.pixels, data)?;
        op.hash = h.hash;
        Ok(op)
    }
}

/// Assembles the matrix of `f ↦ R_W f` on `basis`: column `pixel·N + c`
/// is the transform of basis function `pixel` in component `c`. Rays are
/// processed in parallel; a failing ray is named in the error.
pub fn assemble(
    weight: &MatrixWeight,
    basis: &Arc<PixelBasis>,
    fan: &[InfluxPoint],
    metric: &MetricField,
    quad_step: f64,
) -> Result<ForwardOperator> {
    if fan.is_empty() {
        return Err(GeoError::InvalidArgument("fan is empty".into()));
    }
    let n = weight.size();
    let n_pixels = basis.len();
    let cols = n_pixels * n;
    let mut data = vec![ZERO; fan.len() * n * cols];
    let ray_pixels = data
        .par_chunks_mut(n * cols)
        .zip(fan.par_iter())
        .enumerate()
        .map(|(ray, (block, z))| -> Result<Vec<u32>> {
            let path = trace_influx(metric, z, quad_step).map_err(|e| e.at_ray(ray))?;
            let q = PathQuadrature::new(z, &path);
            let ws = weight_on_path(weight, z, &path, &q).map_err(|e| e.at_ray(ray))?;
            let mut touched = vec![false; n_pixels];
            for ((p, &wq), wm) in q.points.iter().zip(&q.weights).zip(&ws) {
                if wq == 0.0 {
                    continue;
                }
                for (pix, phi) in basis.stencil(&p.x) {
                    touched[pix] = true;
                    let s = wq * phi;
                    for i in 0..n {
                        let row = &mut block[i * cols..(i + 1) * cols];
                        for c in 0..n {
                            row[pix * n + c] += wm[(i, c)] * s;
                        }
                    }
                }
            }
            if block.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(GeoError::Numeric("non-finite operator entry".into()).at_ray(ray));
            }
            Ok((0..n_pixels as u32).filter(|&p| touched[p as usize]).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let descr = format!(
        "{:?}|{:?}|m={} delta={} pixels={}|rays={} first={:?} last={:?}|step={}",
        metric.config(),
        weight,
        basis.m(),
        basis.margin(),
        n_pixels,
        fan.len(),
        fan.first(),
        fan.last(),
        quad_step
    );
    Ok(ForwardOperator {
        n,
        n_rays: fan.len(),
        n_pixels,
        data,
        ray_pixels,
        hash: sha256_hex(descr.as_bytes()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{influx_fan, Point};
    use crate::transforms::{ray_transform, MatrixFieldConfig, VectorSource};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
        (0..len)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    fn weight2() -> MatrixWeight {
        MatrixWeight::Field(
            MatrixFieldConfig::Exp {
                n: 2,
                entries: vec![
                    vec!["0.3*exp(-(x1^2+x2^2)/0.3)".into(), "0.2*sin(beta)".into()],
                    vec!["0.1*x1".into(), "-0.2*cos(alpha)*x2".into()],
                ],
            }
            .build()
            .unwrap(),
        )
    }

    fn small_setup() -> (Arc<PixelBasis>, Vec<InfluxPoint>, MetricField) {
        (
            Arc::new(PixelBasis::new(10).unwrap()),
            influx_fan(12, 6, 0.1).unwrap(),
            MetricField::conformal_bump(0.05, [0.0, 0.0], 0.5).unwrap(),
        )
    }

    #[test]
    fn apply_matches_direct_quadrature() {
        let (basis, fan, m) = small_setup();
        let w = weight2();
        let op = assemble(&w, &basis, &fan, &m, 1e-2).unwrap();
        assert_eq!((op.rows(), op.cols()), (fan.len() * 2, basis.len() * 2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let c = random_vec(&mut rng, op.cols());
            let y = op.apply(&c).unwrap();
            let f = VectorSource::grid(basis.clone(), 2, c).unwrap();
            for (ray, z) in fan.iter().enumerate() {
                let direct = ray_transform(&w, &f, z, &m, 1e-2).unwrap();
                for i in 0..2 {
                    assert!((y[ray * 2 + i] - direct[i]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn linearity_and_zero() {
        let (basis, fan, m) = small_setup();
        let op = assemble(&weight2(), &basis, &fan, &m, 1e-2).unwrap();
        assert!(op.apply(&vec![ZERO; op.cols()]).unwrap().iter().all(|v| *v == ZERO));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, b) = (random_vec(&mut rng, op.cols()), random_vec(&mut rng, op.cols()));
        let sum: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (ya, yb, ys) = (op.apply(&a).unwrap(), op.apply(&b).unwrap(), op.apply(&sum).unwrap());
        for i in 0..ys.len() {
            assert!((ys[i] - ya[i] - yb[i]).norm() < 1e-13);
        }
        assert!(op.apply(&a[1..]).is_err());
    }

    #[test]
    fn adjoint_consistency() {
        let (basis, fan, m) = small_setup();
        let op = assemble(&weight2(), &basis, &fan, &m, 1e-2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..3 {
            let c = random_vec(&mut rng, op.cols());
            let d = random_vec(&mut rng, op.rows());
            let lhs = dot(&op.apply(&c).unwrap(), &d);
            let rhs = dot(&c, &op.apply_adjoint(&d).unwrap());
            assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));
        }
        // gram equals AᴴA column by column
        let g = op.gram();
        let e: Vec<Complex64> = (0..op.cols())
            .map(|k| if k == 7 { Complex64::new(1.0, 0.0) } else { ZERO })
            .collect();
        let col = op.apply_adjoint(&op.apply(&e).unwrap()).unwrap();
        for k in 0..op.cols() {
            assert!((g[(k, 7)] - col[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn rotation_invariant_phantom_gives_beta_symmetric_sinogram() {
        let basis = Arc::new(PixelBasis::new(24).unwrap());
        let fan = influx_fan(8, 5, 0.1).unwrap();
        let m = MetricField::euclidean();
        let op = assemble(&MatrixWeight::identity(1), &basis, &fan, &m, 1e-2).unwrap();
        let c = VectorSource::gaussian(1, 1.0, [0.0, 0.0], 0.3).project(&basis);
        let y = op.apply(&c).unwrap();
        // quarter turns map the pixel grid to itself, so values agree to roundoff
        for b in 0..8 {
            for a in 0..5 {
                let (v, w) = (y[b * 5 + a], y[((b + 2) % 8) * 5 + a]);
                assert!((v - w).norm() < 1e-10, "{v} {w}");
            }
        }
        // all β agree to discretization error
        let peak = y.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for a in 0..5 {
            for b in 1..8 {
                assert!((y[b * 5 + a] - y[a]).norm() < 1e-2 * peak);
            }
        }
    }

    #[test]
    fn unseen_pixels_are_zero_columns() {
        // rays near β = 0 that stay close to the boundary never reach the center
        let basis = Arc::new(PixelBasis::new(16).unwrap());
        let fan: Vec<InfluxPoint> = (0..5)
            .flat_map(|i| (0..3).map(move |j| InfluxPoint::new(-0.2 + 0.1 * i as f64, 1.3 + 0.05 * j as f64)))
            .collect();
        let op = assemble(&MatrixWeight::identity(1), &basis, &fan, &MetricField::euclidean(), 1e-2).unwrap();
        let zero = op.zero_columns();
        assert!(!zero.is_empty() && zero.len() < basis.len());
        let center = (0..basis.len())
            .min_by(|&a, &b| basis.center(a).norm().total_cmp(&basis.center(b).norm()))
            .unwrap();
        assert!(zero.contains(&center));
    }

    #[test]
    fn select_and_export_round_trip() {
        let (basis, fan, m) = small_setup();
        let op = assemble(&weight2(), &basis, &fan, &m, 1e-2).unwrap();
        let all_rays: Vec<usize> = (0..op.rays()).collect();
        let all_pix: Vec<usize> = (0..op.pixels()).collect();
        let same = op.select(&all_rays, &all_pix);
        assert!(same.data == op.data);
        let sub = op.select(&[3, 1], &[5, 2, 9]);
        assert_eq!((sub.rows(), sub.cols()), (4, 6));
        assert_eq!(sub.entry(2, 1), op.entry(2, 5 * 2 + 1));
        let mut buf = Vec::new();
        op.export(&mut buf).unwrap();
        let back = ForwardOperator::import(&mut buf.as_slice()).unwrap();
        assert_eq!(back.header(), op.header());
        for r in 0..op.rows() {
            for c in 0..op.cols() {
                let (a, b) = (op.entry(r, c), back.entry(r, c));
                assert!((a - b).norm() <= 1e-6 * a.norm().max(1e-30) + 1e-38);
            }
        }
    }

    #[test]
    fn sinogram_converges_under_grid_refinement() {
        let m = MetricField::conformal_bump(0.05, [0.0, 0.0], 0.5).unwrap();
        let fan = influx_fan(8, 4, 0.1).unwrap();
        let w = MatrixWeight::identity(1);
        let bump = |x: &Point| (-(x.x * x.x + (x.y - 0.1) * (x.y - 0.1)) / 0.08).exp();
        let exact = VectorSource::expr(&["exp(-(x1^2+(x2-0.1)^2)/0.08)"]).unwrap();
        let truth: Vec<Complex64> = fan.iter().map(|z| ray_transform(&w, &exact, z, &m, 1e-3).unwrap()[0]).collect();
        let norm = truth.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let err = |res: usize| {
            let basis = Arc::new(PixelBasis::new(res).unwrap());
            let c = basis.project(1, |x| vec![Complex64::new(bump(x), 0.0)]);
            let y = assemble(&w, &basis, &fan, &m, 1e-3).unwrap().apply(&c).unwrap();
            y.iter().zip(&truth).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt() / norm
        };
        let (e64, e128) = (err(64), err(128));
        // bilinear sampling is second order, so the ratio sits on 4 itself
        let order = (e64 / e128).log2();
        println!(
            "grid refinement: {e64:.3e} -> {e128:.3e}, order {order:.3}, e64 <= 4*e128: {}",
            e64 <= 4.0 * e128
        );
        assert!(e128 < e64 && e128 < 2e-3, "{e64:.3e} -> {e128:.3e}");
        assert!((order - 2.0).abs() <= 0.1, "order {order:.3}");
    }

    #[test]
    fn singular_weight_names_the_ray() {
        let basis = Arc::new(PixelBasis::new(8).unwrap());
        let w = MatrixWeight::Field(
            MatrixFieldConfig::Expr {
                n: 1,
                entries: vec![vec!["x1".into()]],
            }
            .build()
            .unwrap(),
        );
        let fan = influx_fan(4, 1, 0.1).unwrap();
        let err = assemble(&w, &basis, &fan, &MetricField::euclidean(), 1e-2).unwrap_err();
        assert!(matches!(err, GeoError::Ray { .. }));
        assert!(matches!(err.root(), GeoError::WeightSingular { .. }));
    }
}
