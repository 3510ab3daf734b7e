//! Matrix-weighted and attenuated ray transforms, nonabelian scattering data
//! and the pseudo-linearization identity.

mod field;
mod pseudo;
mod quad;
mod ray;
mod sinogram;
mod source;
mod transport;
mod weight;

pub use field::{
    determinant, expm, invert, kronecker_sum, unvec_row_major, vec_row_major, CMat, CustomField, ExprMatrix, FieldPoint, GridMatrixField,
    MatrixField, MatrixFieldConfig, SINGULAR_DET,
};
pub use pseudo::{difference_source, pseudo_residual, pseudo_transform, pseudo_weight};
pub use quad::PathQuadrature;
pub use ray::{ray_transform, weight_on_path};
pub use sinogram::{ray_sinogram, scattering_sinogram, Sinogram, SinogramKind};
pub use source::{CustomSource, SourceConfig, VectorSource};
pub use transport::{
    attenuated_transform, attenuated_transform_direct, fundamental_solution, scattering_data, transport_along, transport_weight,
    TransportSolution,
};
pub use weight::{Attenuation, MatrixWeight, WeightConfig};
