//! Second fundamental form of the boundary and of concentric chart circles.

use nalgebra::Vector2;

use super::metric::{christoffel_unchecked, contract, MetricField, Point};
use crate::error::Result;

/// Inward `g`-unit normal to the chart circle through `x`.
fn inward_normal(metric: &MetricField, x: &Point) -> Vector2<f64> {
    let ginv = metric.g_unchecked(x).try_inverse().expect("metric is positive definite");
    let n = ginv * (-x);
    n / metric.norm2(x, &n).sqrt()
}

/// `Π(T, T)` for the circle `|x| = r` at angle `theta`, with respect to the
/// inward normal `ν`; positive means the disk `|x| < r` is strictly convex
/// there. Computed as `⟨ν, ∇_T T⟩_g` from the curve's second derivative.
pub fn circle_convexity(metric: &MetricField, radius: f64, theta: f64) -> Result<f64> {
    let (s, c) = theta.sin_cos();
    let x = Point::new(radius * c, radius * s);
    let d1 = Vector2::new(-radius * s, radius * c);
    let d2 = Vector2::new(-radius * c, -radius * s);
    let gamma = christoffel_unchecked(metric, &x)?;
    let accel = d2 + contract(&gamma, &d1, &d1);
    let nu = inward_normal(metric, &x);
    Ok(metric.inner(&x, &nu, &accel) / metric.norm2(&x, &d1))
}

/// Boundary second fundamental form `Π_x(T, T)` at boundary angle `beta`.
pub fn strict_convexity(metric: &MetricField, beta: f64) -> Result<f64> {
    circle_convexity(metric, 1.0, beta)
}

/// Minimum of [`circle_convexity`] over `samples` equally spaced angles.
pub fn min_circle_convexity(metric: &MetricField, radius: f64, samples: usize) -> Result<f64> {
    let mut min = f64::INFINITY;
    for k in 0..samples.max(1) {
        let theta = std::f64::consts::TAU * k as f64 / samples.max(1) as f64;
        min = min.min(circle_convexity(metric, radius, theta)?);
    }
    Ok(min)
}

/// `−⟨∇_T ν, T⟩_g` with `∂_θ ν` taken by centered differences. Independent
/// of [`circle_convexity`]; used to cross-check it.
pub fn circle_convexity_fd(metric: &MetricField, radius: f64, theta: f64, h: f64) -> Result<f64> {
    let at = |th: f64| Point::new(radius * th.cos(), radius * th.sin());
    let x = at(theta);
    let d1 = Vector2::new(-radius * theta.sin(), radius * theta.cos());
    let speed = metric.norm2(&x, &d1).sqrt();
    let dnu = (inward_normal(metric, &at(theta + h)) - inward_normal(metric, &at(theta - h))) / (2.0 * h);
    let gamma = christoffel_unchecked(metric, &x)?;
    let nu = inward_normal(metric, &x);
    let cov = (dnu + contract(&gamma, &d1, &nu)) / speed;
    let t = d1 / speed;
    Ok(-metric.inner(&x, &cov, &t))
}
