//! Gaussian wave-packet (FBI) transform, exponential-decay classification of
//! analytic wavefront points, and a consistency probe for the euclidean
//! X-ray transform.

mod distribution;
mod fbi;
mod packet;
mod radon;
mod wf;

pub use distribution::{gaussian_segment, DistributionConfig, TestDistribution, MAX_RELATIVE_STEP};
pub use fbi::{decay_fit, default_lambda_grid, fbi, geometric_grid, DecayFit, FbiResponse, MAGNITUDE_FLOOR};
pub use packet::{packet_constant, packet_peak, wave_packet, PhaseSpacePoint};
pub use radon::{
    canonical_images, default_probe_set, radon_wf_consistency, DiskPhantom, ImageProbe, RadonProbe, RadonWfReport, RadonWfSetup,
};
pub use wf::{conic_neighborhood, wf_probe, WfClassification, WfSample, WfSetup};
