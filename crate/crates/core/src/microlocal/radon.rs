use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::distribution::{TestDistribution, MAX_RELATIVE_STEP};
use super::packet::PhaseSpacePoint;
use super::wf::{wf_probe, WfClassification, WfSetup};
use crate::error::{GeoError, Result};
use crate::geometry::{InfluxPoint, MetricField};

/// Disk indicator phantom `a·1_{|x − c| ≤ R}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskPhantom {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DiskPhantom {
    fn default() -> Self {
        DiskPhantom {
            center: [0.0, 0.0],
            radius: 0.5,
            amplitude: 1.0,
        }
    }
}

impl DiskPhantom {
    /// Known analytic wavefront set: boundary points with normal covectors.
    pub fn is_singular_at(&self, x: [f64; 2], eta: [f64; 2]) -> bool {
        if self.amplitude == 0.0 {
            return false;
        }
        let d = [x[0] - self.center[0], x[1] - self.center[1]];
        let r = d[0].hypot(d[1]);
        let cross = (d[0] * eta[1] - d[1] * eta[0]).abs() / (r * eta[0].hypot(eta[1]));
        (r - self.radius).abs() < 1e-12 && cross < 1e-12
    }

    fn distribution(&self) -> TestDistribution {
        if self.amplitude == 0.0 {
            TestDistribution::Zero { dim: 2 }
        } else {
            TestDistribution::Disk {
                center: self.center,
                radius: self.radius,
            }
        }
    }

    /// Chord length of the fan line `(β, α)` through the disk, times `a`.
    /// The formula extends analytically in `α` past glancing.
    pub fn chord(&self, beta: f64, alpha: f64) -> f64 {
        let (x0, v) = line(beta, alpha);
        let d = ((self.center[0] - x0[0]) * v[1] - (self.center[1] - x0[1]) * v[0]).abs();
        let h = self.radius * self.radius - d * d;
        if h > 0.0 {
            2.0 * self.amplitude * h.sqrt()
        } else {
            0.0
        }
    }
}

/// Entry point and unit direction of the euclidean fan line `(β, α)`.
fn line(beta: f64, alpha: f64) -> ([f64; 2], [f64; 2]) {
    let (sb, cb) = beta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    // v = cos α·(−x₀) + sin α·x₀^⊥
    ([cb, sb], [-ca * cb - sa * sb, -ca * sb + sa * cb])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadonWfSetup {
    pub phantom: WfSetup,
    /// Sinogram probes use a shorter grid: regular decay must stay above
    /// the quadrature roundoff over the fitted range, and long enough that
    /// beats between two equidistant singularities average out.
    pub sinogram: WfSetup,
    /// Quadrature step for the sinogram pairing, in units of `λ^{−1/2}`.
    pub step: f64,
}

impl Default for RadonWfSetup {
    fn default() -> Self {
        RadonWfSetup {
            phantom: WfSetup::default(),
            sinogram: WfSetup {
                lambda_max: 200.0,
                ..Default::default()
            },
            step: MAX_RELATIVE_STEP,
        }
    }
}

/// One image of `(x, η)` under the canonical relation: the fan line through
/// `x` orthogonal to `η`, with the pulled-back covector on `(β, α)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageProbe {
    pub beta: f64,
    pub alpha: f64,
    pub zeta: [f64; 2],
    pub classification: WfClassification,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadonProbe {
    pub x: [f64; 2],
    pub eta: [f64; 2],
    /// From the known wavefront set of the disk indicator.
    pub phantom_singular: bool,
    pub phantom_probe: WfClassification,
    pub images: Vec<ImageProbe>,
    pub all_images_regular: bool,
    /// Sinogram regular at every image while the phantom is singular.
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadonWfReport {
    pub phantom: DiskPhantom,
    pub setup: RadonWfSetup,
    pub probes: Vec<RadonProbe>,
    pub violations: usize,
    pub notes: Vec<String>,
}

/// Fan parameters and pulled-back covectors of the two oriented lines
/// through `x` orthogonal to `η`. `ζ_j = η·∂x/∂p_j` at the time the line
/// passes `x`.
pub fn canonical_images(x: [f64; 2], eta: [f64; 2]) -> Result<Vec<(InfluxPoint, [f64; 2])>> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    if r2 >= 1.0 {
        return Err(GeoError::Domain(x[0], x[1]));
    }
    let n = eta[0].hypot(eta[1]);
    if !(n > 0.0) {
        return Err(GeoError::InvalidArgument("covector η must be nonzero".into()));
    }
    let eta = [eta[0] / n, eta[1] / n];
    let mut out = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let v = [-sign * eta[1], sign * eta[0]];
        let xv = x[0] * v[0] + x[1] * v[1];
        let t = xv + (xv * xv - r2 + 1.0).sqrt();
        let x0 = [x[0] - t * v[0], x[1] - t * v[1]];
        let beta = x0[1].atan2(x0[0]);
        let perp = [-x0[1], x0[0]];
        let alpha = (v[0] * perp[0] + v[1] * perp[1]).atan2(-(v[0] * x0[0] + v[1] * x0[1]));
        let (sa, ca) = alpha.sin_cos();
        let dv_beta = [-ca * perp[0] - sa * x0[0], -ca * perp[1] - sa * x0[1]];
        let dv_alpha = [sa * x0[0] + ca * perp[0], sa * x0[1] + ca * perp[1]];
        let dx_beta = [perp[0] + t * dv_beta[0], perp[1] + t * dv_beta[1]];
        let dx_alpha = [t * dv_alpha[0], t * dv_alpha[1]];
        let zeta = [
            eta[0] * dx_beta[0] + eta[1] * dx_beta[1],
            eta[0] * dx_alpha[0] + eta[1] * dx_alpha[1],
        ];
        out.push((InfluxPoint::new(beta, alpha), zeta));
    }
    Ok(out)
}

/// A default probe set: interior, exterior, boundary-normal and
/// boundary-tangent points of the phantom.
pub fn default_probe_set(p: &DiskPhantom) -> Vec<([f64; 2], [f64; 2])> {
    let c = p.center;
    let on = |t: f64| [c[0] + p.radius * t.cos(), c[1] + p.radius * t.sin()];
    let mut set = Vec::new();
    for k in 0..3 {
        let a = k as f64 * PI / 3.0;
        set.push((c, [a.cos(), a.sin()]));
    }
    set.push(([c[0] + 0.2 * p.radius, c[1] + 0.3 * p.radius], [0.4f64.cos(), 0.4f64.sin()]));
    set.push(([c[0] + 1.5 * p.radius, c[1]], [1.0, 0.0]));
    for t in [0.0, 1.0] {
        set.push((on(t), [t.cos(), t.sin()]));
    }
    set.push((on(0.0), [0.0, 1.0]));
    set
}

/// Checks that no probe point has a regular sinogram at all its images while
/// the phantom is singular there. The sinogram is the closed-form chord
/// length on the euclidean fan, extended periodically in `β`.
pub fn radon_wf_consistency(
    metric: &MetricField,
    phantom: &DiskPhantom,
    probes: &[([f64; 2], [f64; 2])],
    setup: &RadonWfSetup,
) -> Result<RadonWfReport> {
    if !metric.is_euclidean() {
        return Err(GeoError::Hypothesis(
            "geometry mismatch: the Radon probe needs the euclidean metric".into(),
        ));
    }
    let cn = phantom.center[0].hypot(phantom.center[1]);
    if !(phantom.radius > 0.0) || cn + phantom.radius >= 1.0 {
        return Err(GeoError::InvalidArgument("disk phantom must lie inside the unit disk".into()));
    }
    let p = phantom.clone();
    let sinogram = TestDistribution::Function {
        dim: 2,
        f: Arc::new(move |w: &[f64]| p.chord(w[0], w[1])),
        step: setup.step,
    };
    let f = phantom.distribution();
    let mut out = Vec::with_capacity(probes.len());
    let mut notes = Vec::new();
    for &(x, eta) in probes {
        let singular = phantom.is_singular_at(x, eta);
        let u = PhaseSpacePoint::new(x.to_vec(), eta.to_vec())?;
        let phantom_probe = wf_probe(&f, &u, &setup.phantom)?;
        if phantom_probe.regular == singular {
            notes.push(format!(
                "phantom probe at x = {x:?}, η = {eta:?} reads {} against the known {}",
                if phantom_probe.regular { "regular" } else { "singular" },
                if singular { "singular" } else { "regular" }
            ));
        }
        let mut images = Vec::new();
        for (z, zeta) in canonical_images(x, eta)? {
            let v = PhaseSpacePoint::new(vec![z.beta, z.alpha], zeta.to_vec())?;
            images.push(ImageProbe {
                beta: z.beta,
                alpha: z.alpha,
                zeta,
                classification: wf_probe(&sinogram, &v, &setup.sinogram)?,
            });
        }
        let all_regular = images.iter().all(|i| i.classification.regular);
        let violation = all_regular && singular;
        if violation {
            notes.push(format!("violation at x = {x:?}, η = {eta:?}: sinogram regular at every image"));
        }
        out.push(RadonProbe {
            x,
            eta,
            phantom_singular: singular,
            phantom_probe,
            images,
            all_images_regular: all_regular,
            violation,
        });
    }
    let violations = out.iter().filter(|p| p.violation).count();
    Ok(RadonWfReport {
        phantom: phantom.clone(),
        setup: setup.clone(),
        probes: out,
        violations,
        notes,
    })
}
