use super::field::FieldPoint;
use crate::geometry::{GeodesicPath, InfluxPoint};

/// Simpson rule on a traced path. Each interval `[tᵢ, tᵢ₊₁]` contributes
/// `Δ/6·(f(tᵢ) + 4 f(mᵢ) + f(tᵢ₊₁))` using the Hermite midpoint `mᵢ`, which
/// keeps the rule fourth order on the shortened final interval as well.
/// Points are laid out as all nodes followed by all midpoints.
#[derive(Clone, Debug)]
pub struct PathQuadrature {
    pub points: Vec<FieldPoint>,
    pub weights: Vec<f64>,
    pub nodes: usize,
}

impl PathQuadrature {
    pub fn new(z: &InfluxPoint, path: &GeodesicPath) -> Self {
        let nodes = path.samples.len();
        let intervals = path.intervals();
        let mut points = Vec::with_capacity(nodes + intervals);
        let mut weights = vec![0.0; nodes + intervals];
        points.extend(path.samples.iter().map(|s| FieldPoint::on_ray(z, s)));
        points.extend(path.midpoints[..intervals].iter().map(|s| FieldPoint::on_ray(z, s)));
        for i in 0..intervals {
            let dt = path.samples[i + 1].t - path.samples[i].t;
            weights[i] += dt / 6.0;
            weights[i + 1] += dt / 6.0;
            weights[nodes + i] = 4.0 * dt / 6.0;
        }
        PathQuadrature { points, weights, nodes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
