//! Unit-speed geodesics, influx boundary points and exit times.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector2;
use serde::Serialize;

use super::metric::{christoffel_unchecked, contract, rho, MetricField, Point, DISK_SLACK};
use crate::error::{GeoError, Result};

/// Default trapping budget in arclength units.
pub const DEFAULT_TAU_MAX: f64 = 100.0;
/// Exit tolerance on `ρ` for the terminal bisection.
pub const EXIT_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 60;

/// A point of the unit tangent bundle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitTangent {
    pub x: Point,
    pub v: Vector2<f64>,
}

impl UnitTangent {
    /// Rescales `v` to unit `g`-length.
    pub fn normalized(metric: &MetricField, x: Point, v: Vector2<f64>) -> Result<Self> {
        let n2 = metric.norm2(&x, &v);
        if !(n2 > 0.0) {
            return Err(GeoError::InvalidArgument("zero tangent vector".into()));
        }
        Ok(UnitTangent { x, v: v / n2.sqrt() })
    }

    pub fn speed_defect(&self, metric: &MetricField) -> f64 {
        (metric.norm2(&self.x, &self.v) - 1.0).abs()
    }
}

/// A point of the influx boundary `∂₊SM`, parametrized by the boundary angle
/// `beta` and the incidence angle `alpha` measured from the inward normal
/// (positive towards the counter-clockwise tangent).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InfluxPoint {
    pub beta: f64,
    pub alpha: f64,
}

impl InfluxPoint {
    pub fn new(beta: f64, alpha: f64) -> Self {
        InfluxPoint { beta, alpha }
    }

    pub fn base_point(&self) -> Point {
        Point::new(self.beta.cos(), self.beta.sin())
    }

    /// `g`-orthonormal frame at the base point: inward unit normal `ν` and
    /// counter-clockwise unit tangent `T`.
    pub fn frame(&self, metric: &MetricField) -> (Vector2<f64>, Vector2<f64>) {
        let x = self.base_point();
        let g = metric.g_unchecked(&x);
        let ginv = g.try_inverse().expect("metric is positive definite");
        let nu = ginv * (-x);
        let nu = nu / metric.norm2(&x, &nu).sqrt();
        let t = Vector2::new(-x.y, x.x);
        let t = t / metric.norm2(&x, &t).sqrt();
        (nu, t)
    }

    pub fn tangent(&self, metric: &MetricField) -> UnitTangent {
        let (nu, t) = self.frame(metric);
        UnitTangent {
            x: self.base_point(),
            v: nu * self.alpha.cos() + t * self.alpha.sin(),
        }
    }

    /// `⟨v, ν⟩_g`, non-negative for influx points.
    pub fn inward_component(&self, metric: &MetricField) -> f64 {
        let (nu, _) = self.frame(metric);
        let z = self.tangent(metric);
        metric.inner(&z.x, &z.v, &nu)
    }

    pub fn is_glancing(&self) -> bool {
        self.alpha.abs() >= FRAC_PI_2
    }
}

/// One sample `(t, x(t), v(t))` of a traced geodesic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathSample {
    pub t: f64,
    pub x: Point,
    pub v: Vector2<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathOutcome {
    /// Left the disk at `tau_plus`.
    Exited,
    /// Still inside after the travel-time budget.
    Trapped { budget: f64 },
}

/// A traced geodesic. `samples` are spaced by `step` except for the final
/// interval, which ends exactly at the boundary event. `midpoints[i]` is the
/// state halfway through `[samples[i].t, samples[i+1].t]`, obtained by cubic
/// Hermite interpolation of the position and velocity.
#[derive(Clone, Debug)]
pub struct GeodesicPath {
    pub samples: Vec<PathSample>,
    pub midpoints: Vec<PathSample>,
    pub step: f64,
    pub tau_plus: f64,
    pub tau_minus: Option<f64>,
    pub outcome: PathOutcome,
}

impl GeodesicPath {
    pub fn is_trapped(&self) -> bool {
        matches!(self.outcome, PathOutcome::Trapped { .. })
    }

    pub fn start(&self) -> &PathSample {
        &self.samples[0]
    }

    pub fn end(&self) -> &PathSample {
        self.samples.last().expect("path has at least one sample")
    }

    pub fn intervals(&self) -> usize {
        self.samples.len().saturating_sub(1)
    }

    /// Largest `| |v|²_g − 1 |` over samples and midpoints.
    pub fn speed_defect(&self, metric: &MetricField) -> f64 {
        self.samples
            .iter()
            .chain(&self.midpoints)
            .map(|s| (metric.norm2(&s.x, &s.v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Smallest chart radius reached along the path.
    pub fn min_radius(&self) -> f64 {
        self.samples
            .iter()
            .chain(&self.midpoints)
            .map(|s| s.x.norm())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Copy, Debug)]
struct State {
    x: Point,
    v: Vector2<f64>,
}

fn acceleration(metric: &MetricField, x: &Point, v: &Vector2<f64>) -> Result<Vector2<f64>> {
    let gamma = christoffel_unchecked(metric, x)?;
    Ok(-contract(&gamma, v, v))
}

fn rk4(metric: &MetricField, s: &State, h: f64) -> Result<State> {
    let a1 = acceleration(metric, &s.x, &s.v)?;
    let (x2, v2) = (s.x + s.v * (0.5 * h), s.v + a1 * (0.5 * h));
    let a2 = acceleration(metric, &x2, &v2)?;
    let (x3, v3) = (s.x + v2 * (0.5 * h), s.v + a2 * (0.5 * h));
    let a3 = acceleration(metric, &x3, &v3)?;
    let (x4, v4) = (s.x + v3 * h, s.v + a3 * h);
    let a4 = acceleration(metric, &x4, &v4)?;
    Ok(State {
        x: s.x + (s.v + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0),
        v: s.v + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0),
    })
}

fn hermite_mid(metric: &MetricField, a: &PathSample, b: &PathSample) -> Result<PathSample> {
    let dt = b.t - a.t;
    let acc_a = acceleration(metric, &a.x, &a.v)?;
    let acc_b = acceleration(metric, &b.x, &b.v)?;
    Ok(PathSample {
        t: 0.5 * (a.t + b.t),
        x: (a.x + b.x) * 0.5 + (a.v - b.v) * (dt / 8.0),
        v: (a.v + b.v) * 0.5 + (acc_a - acc_b) * (dt / 8.0),
    })
}

/// Integrates forward until the boundary is crossed, returning the raw
/// samples and the outcome. The start may lie on the boundary.
fn integrate(metric: &MetricField, start: &UnitTangent, h: f64, tau_max: f64) -> Result<(Vec<PathSample>, PathOutcome)> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(GeoError::InvalidArgument(format!("step must be positive (got {h})")));
    }
    if !(tau_max > 0.0) {
        return Err(GeoError::InvalidArgument(format!("tau_max must be positive (got {tau_max})")));
    }
    if rho(&start.x) < -2.0 * DISK_SLACK {
        return Err(GeoError::Domain(start.x.x, start.x.y));
    }
    let mut samples = vec![PathSample {
        t: 0.0,
        x: start.x,
        v: start.v,
    }];
    let mut state = State { x: start.x, v: start.v };
    let mut t = 0.0;
    let max_steps = (tau_max / h).ceil() as usize;
    for _ in 0..max_steps {
        let next = rk4(metric, &state, h)?;
        if rho(&next.x) > 0.0 {
            state = next;
            t += h;
            samples.push(PathSample { t, x: state.x, v: state.v });
            continue;
        }
        // Boundary event inside (t, t + h]: bisect on the step length.
        let (mut lo, mut hi) = (0.0, h);
        let mut exit = next;
        let mut dt = h;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let s = rk4(metric, &state, mid)?;
            let r = rho(&s.x);
            exit = s;
            dt = mid;
            if r.abs() <= EXIT_TOL {
                break;
            }
            if r > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if dt > 0.0 {
            samples.push(PathSample {
                t: t + dt,
                x: exit.x,
                v: exit.v,
            });
        }
        return Ok((samples, PathOutcome::Exited));
    }
    Ok((samples, PathOutcome::Trapped { budget: tau_max }))
}

fn finish(metric: &MetricField, samples: Vec<PathSample>, outcome: PathOutcome, h: f64) -> Result<GeodesicPath> {
    let midpoints = samples
        .windows(2)
        .map(|w| hermite_mid(metric, &w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    let tau_plus = match outcome {
        PathOutcome::Exited => samples.last().map_or(0.0, |s| s.t),
        PathOutcome::Trapped { .. } => f64::INFINITY,
    };
    Ok(GeodesicPath {
        samples,
        midpoints,
        step: h,
        tau_plus,
        tau_minus: None,
        outcome,
    })
}

/// Traces the geodesic through `start`, reporting trapping in the outcome
/// rather than as an error.
pub fn trace_with_budget(metric: &MetricField, start: &UnitTangent, h: f64, tau_max: f64) -> Result<GeodesicPath> {
    let (samples, outcome) = integrate(metric, start, h, tau_max)?;
    finish(metric, samples, outcome, h)
}

/// Traces the geodesic through `start` forward to the boundary.
pub fn geodesic_trace(metric: &MetricField, start: &UnitTangent, h: f64) -> Result<GeodesicPath> {
    trace_checked(metric, start, h, DEFAULT_TAU_MAX)
}

pub fn trace_checked(metric: &MetricField, start: &UnitTangent, h: f64, tau_max: f64) -> Result<GeodesicPath> {
    let path = trace_with_budget(metric, start, h, tau_max)?;
    if let PathOutcome::Trapped { budget } = path.outcome {
        return Err(GeoError::Trapped { budget });
    }
    Ok(path)
}

/// Traces from an influx point. Glancing points (`|α| ≥ π/2`) yield a
/// single-sample path with `τ₊ = 0`.
pub fn trace_influx(metric: &MetricField, z: &InfluxPoint, h: f64) -> Result<GeodesicPath> {
    trace_influx_budget(metric, z, h, DEFAULT_TAU_MAX)
}

pub fn trace_influx_budget(metric: &MetricField, z: &InfluxPoint, h: f64, tau_max: f64) -> Result<GeodesicPath> {
    let start = z.tangent(metric);
    if z.is_glancing() {
        return finish(
            metric,
            vec![PathSample {
                t: 0.0,
                x: start.x,
                v: start.v,
            }],
            PathOutcome::Exited,
            h,
        );
    }
    let mut path = trace_checked(metric, &start, h, tau_max)?;
    path.tau_minus = Some(0.0);
    Ok(path)
}

/// Traces forward and also records the backward exit time `τ₋` by
/// integrating from `(x, −v)`.
pub fn trace_both_ways(metric: &MetricField, start: &UnitTangent, h: f64) -> Result<GeodesicPath> {
    let mut path = geodesic_trace(metric, start, h)?;
    let back = UnitTangent { x: start.x, v: -start.v };
    let tau_minus = if rho(&start.x) <= EXIT_TOL {
        0.0
    } else {
        geodesic_trace(metric, &back, h)?.tau_plus
    };
    path.tau_minus = Some(tau_minus);
    Ok(path)
}
