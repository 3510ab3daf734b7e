//! Geometry of analytic metrics on the closed unit disk: geodesics, influx
//! fans, boundary convexity, conjugate points and admissibility.

mod admissibility;
mod convexity;
mod fan;
mod geodesic;
mod jacobi;
mod metric;

pub use admissibility::{admissibility_check, has_self_intersection, AdmissibilityReport};
pub use convexity::{circle_convexity, circle_convexity_fd, min_circle_convexity, strict_convexity};
pub use fan::{fan_from_config, influx_fan, nontrapping_scan, FanConfig, NontrappingReport};
pub use geodesic::{
    geodesic_trace, trace_both_ways, trace_checked, trace_influx, trace_influx_budget, trace_with_budget, GeodesicPath, InfluxPoint,
    PathOutcome, PathSample, UnitTangent, DEFAULT_TAU_MAX, EXIT_TOL,
};
pub use jacobi::{conjugate_scan, conjugate_times_for_profile, fan_free_of_conjugate_points};
pub use metric::{christoffel, contract, gauss_curvature_fd, metric_eval, rho, Christoffel, MetricConfig, MetricField, Point};
