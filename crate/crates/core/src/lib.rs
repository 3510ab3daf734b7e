//! Numerical toolkit for matrix-weighted, attenuated and nonabelian geodesic
//! ray transforms on analytic Riemannian disks, with desk-scale injectivity
//! probes and FBI-based analytic wavefront classification.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop, clippy::redundant_guards, clippy::large_enum_variant)]

pub mod config;
pub mod discrete;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod io;
pub mod lab;
pub mod microlocal;
pub mod transforms;

pub use error::{GeoError, Result};
