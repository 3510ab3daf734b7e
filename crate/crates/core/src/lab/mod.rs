//! Injectivity experiments: global and local probes, layer stripping and
//! Higgs-field recovery from scattering data.

mod higgs;
mod noise;
mod probes;
mod report;
mod strip;

pub use higgs::{higgs_constant_closed_form, higgs_probe, higgs_recover, HiggsResult, HiggsSetup, DIVERGENCE_STREAK};
pub use noise::{noise_floor, perturb, NoiseSample, NOISE_CONSTANT};
pub use probes::{global_probe, global_run, local_probe, GridSetup, LocalSetup, Reconstruction};
pub use report::{HypothesisCheck, Outcome, ProbeReport, Thresholds};
pub use strip::{layer_stripping, ray_depths, ring_radii, strip_probe, StripResult, StripSetup};
