//! Pixel discretization, dense forward operators and solvers.

mod basis;
mod cgls;
mod operator;
mod spectral;

pub use basis::{PixelBasis, Stencil};
pub use cgls::{cgls, relative_error, CglsOutcome};
pub use operator::{assemble, ForwardOperator, OperatorHeader, ZERO_COLUMN_TOL};
pub use spectral::{lanczos_max, sigma_extremes, sigma_extremes_gram};
