//! Run configuration: one JSON document describing the geometry, weight,
//! fan, phantom and probe settings of a run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geometry::{fan_from_config, FanConfig, InfluxPoint, MetricConfig, MetricField, DEFAULT_TAU_MAX};
use crate::io::sha256_hex;
use crate::lab::{GridSetup, HiggsSetup, LocalSetup, StripSetup, Thresholds};
use crate::microlocal::{DiskPhantom, DistributionConfig, PhaseSpacePoint, RadonWfSetup, WfSetup};
use crate::transforms::{MatrixField, MatrixFieldConfig, MatrixWeight, SourceConfig, VectorSource, WeightConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSetup {
    pub beta: f64,
    pub alpha: f64,
    pub step: f64,
    pub tau_max: f64,
}

impl Default for TraceSetup {
    fn default() -> Self {
        TraceSetup {
            beta: 0.0,
            alpha: 0.0,
            step: 1e-3,
            tau_max: DEFAULT_TAU_MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinogramSetup {
    pub quad_step: f64,
    /// Relative data noise added with the run seed; zero for clean data.
    pub noise: f64,
}

impl Default for SinogramSetup {
    fn default() -> Self {
        SinogramSetup {
            quad_step: 1e-3,
            noise: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HiggsConfig {
    pub field: MatrixFieldConfig,
    pub fan: FanConfig,
    pub setup: HiggsSetup,
}

impl Default for HiggsConfig {
    fn default() -> Self {
        let bump = "0.3*exp(-(x1^2+x2^2)/0.18)";
        HiggsConfig {
            field: MatrixFieldConfig::Expr {
                n: 2,
                entries: vec![
                    vec![bump.into(), format!("0.5*x1*{bump}")],
                    vec![format!("-0.5*x2*{bump}"), format!("i*{bump}")],
                ],
            },
            fan: FanConfig {
                n_beta: 40,
                n_alpha: 20,
                alpha_margin: 0.05,
            },
            setup: HiggsSetup::default(),
        }
    }
}

/// Wavefront probe: a test distribution classified at explicit points, or,
/// without one, the sinogram consistency check on a disk phantom.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WfConfig {
    pub distribution: Option<DistributionConfig>,
    pub points: Vec<PhaseSpacePoint>,
    pub setup: WfSetup,
    pub disk: DiskPhantom,
    pub radon: RadonWfSetup,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub metric: MetricConfig,
    /// Defaults to the identity of the phantom's size.
    pub weight: Option<WeightConfig>,
    pub fan: FanConfig,
    pub phantom: SourceConfig,
    pub thresholds: Thresholds,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub trace: TraceSetup,
    pub sinogram: SinogramSetup,
    pub grid: GridSetup,
    /// Relative noise levels for the noise-floor study of the global probe.
    pub noise: Vec<f64>,
    pub local: LocalSetup,
    pub strip: StripSetup,
    pub higgs: HiggsConfig,
    pub wf: WfConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            metric: MetricConfig::Euclidean {},
            weight: None,
            fan: FanConfig {
                n_beta: 80,
                n_alpha: 60,
                alpha_margin: 0.05,
            },
            phantom: SourceConfig::Gaussian {
                n: 1,
                amplitude: 1.0,
                center: [0.1, 0.05],
                width: 0.5,
            },
            thresholds: Thresholds::default(),
            out: None,
            seed: 0,
            trace: TraceSetup::default(),
            sinogram: SinogramSetup::default(),
            grid: GridSetup::default(),
            noise: Vec::new(),
            local: LocalSetup::default(),
            strip: StripSetup::default(),
            higgs: HiggsConfig::default(),
            wf: WfConfig::default(),
        }
    }
}

/// The built objects of a validated configuration.
#[derive(Clone, Debug)]
pub struct RunInputs {
    pub metric: MetricField,
    pub weight: MatrixWeight,
    pub phantom: VectorSource,
    pub fan: Vec<InfluxPoint>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GeoError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Parses and validates; syntax errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| GeoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section that can be checked without tracing rays.
    pub fn validate(&self) -> Result<()> {
        self.inputs()?;
        positive("trace.step", self.trace.step)?;
        positive("trace.tau_max", self.trace.tau_max)?;
        positive("sinogram.quad_step", self.sinogram.quad_step)?;
        positive("grid.quad_step", self.grid.quad_step)?;
        positive("local.quad_step", self.local.quad_step)?;
        positive("higgs.setup.quad_step", self.higgs.setup.quad_step)?;
        if !(self.sinogram.noise >= 0.0) || self.noise.iter().any(|e| !(*e > 0.0)) {
            return Err(GeoError::Config("noise levels must be non-negative".into()));
        }
        if self.strip.n_rings == 0 {
            return Err(GeoError::Config("strip.n_rings must be at least 1".into()));
        }
        self.higgs_field()?;
        fan_from_config(&self.higgs.fan).map_err(|e| GeoError::Config(format!("higgs.fan: {e}")))?;
        if let Some(d) = &self.wf.distribution {
            d.build()?;
            if self.wf.points.is_empty() {
                return Err(GeoError::Config("wf.points must name at least one phase-space point".into()));
            }
            for p in &self.wf.points {
                let p = PhaseSpacePoint::new(p.z.clone(), p.zeta.clone()).map_err(|e| GeoError::Config(format!("wf.points: {e}")))?;
                if p.dim() != d.build()?.dim() {
                    return Err(GeoError::Config("wf.points dimension differs from the distribution".into()));
                }
            }
        }
        Ok(())
    }

    pub fn inputs(&self) -> Result<RunInputs> {
        let metric = MetricField::from_config(&self.metric).map_err(|e| GeoError::Config(format!("metric: {e}")))?;
        let phantom = self.phantom.build().map_err(|e| GeoError::Config(format!("phantom: {e}")))?;
        let weight = match &self.weight {
            Some(w) => w.build().map_err(|e| match e {
                GeoError::WeightSingular { .. } => e,
                e => GeoError::Config(format!("weight: {e}")),
            })?,
            None => MatrixWeight::identity(phantom.size()),
        };
        if weight.size() != phantom.size() {
            return Err(GeoError::Config(format!(
                "weight is {0}x{0} but the phantom has {1} components",
                weight.size(),
                phantom.size()
            )));
        }
        let fan = fan_from_config(&self.fan).map_err(|e| GeoError::Config(format!("fan: {e}")))?;
        Ok(RunInputs {
            metric,
            weight,
            phantom,
            fan,
        })
    }

    pub fn higgs_field(&self) -> Result<MatrixField> {
        self.higgs.field.build().map_err(|e| GeoError::Config(format!("higgs.field: {e}")))
    }

    /// SHA-256 of the canonical JSON serialization, ignoring `out`.
    pub fn hash(&self) -> String {
        let content = RunConfig { out: None, ..self.clone() };
        sha256_hex(&serde_json::to_vec(&content).expect("config serializes"))
    }

    /// SHA-256 of each input section, for manifests.
    pub fn section_hashes(&self) -> Vec<(&'static str, String)> {
        let h = |v: serde_json::Result<Vec<u8>>| sha256_hex(&v.expect("config serializes"));
        vec![
            ("metric", h(serde_json::to_vec(&self.metric))),
            ("weight", h(serde_json::to_vec(&self.weight))),
            ("fan", h(serde_json::to_vec(&self.fan))),
            ("phantom", h(serde_json::to_vec(&self.phantom))),
            ("thresholds", h(serde_json::to_vec(&self.thresholds))),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn default_round_trips() {
        let text = serde_json::to_string_pretty(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"metrc": {"kind": "euclidean"}}"#,
            r#"{"fan": {"n_beta": 4, "n_alpha": 2, "alpha_margin": 0.1, "extra": 1}}"#,
            r#"{"higgs": {"setup": {"damp": 0.5}}}"#,
        ] {
            let e = RunConfig::from_json(text).unwrap_err();
            assert!(e.to_string().contains("unknown field"), "{e}");
            assert_eq!(e.exit_code(), 2);
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = RunConfig::from_json("{\n  \"seed\": 1,\n  \"out\" \"x\"\n}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("column"), "{msg}");
    }

    #[test]
    fn weight_size_must_match_phantom() {
        let e = RunConfig::from_json(r#"{"weight": {"kind": "identity", "n": 2}}"#).unwrap_err();
        assert!(e.to_string().contains("components"), "{e}");
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in [
            r#"{"trace": {"step": 0}}"#,
            r#"{"fan": {"n_beta": 0, "n_alpha": 2, "alpha_margin": 0.1}}"#,
            r#"{"metric": {"kind": "expr", "phi": "x1 +"}}"#,
            r#"{"wf": {"distribution": {"kind": "dirac", "point": [0.5]}}}"#,
            r#"{"noise": [-1e-6]}"#,
        ] {
            let e = RunConfig::from_json(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), RunConfig::default().hash());
        b.seed = 0;
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
    }
}
