use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use geoxrt::config::RunConfig;
use geoxrt::discrete::{assemble, PixelBasis};
use geoxrt::geometry::{fan_from_config, trace_influx_budget, InfluxPoint};
use geoxrt::io::{sha256_hex, write_atomic};
use geoxrt::lab::{global_run, higgs_probe, local_probe, noise_floor, perturb, strip_probe, ProbeReport};
use geoxrt::microlocal::{default_probe_set, radon_wf_consistency, wf_probe, PhaseSpacePoint};
use geoxrt::transforms::ray_sinogram;
use geoxrt::{GeoError, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::Probe;

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config_sha256: String,
    inputs: BTreeMap<&'static str, String>,
    outputs: BTreeMap<String, String>,
    details: Value,
}

fn to_json(v: &impl Serialize) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v).map_err(|e| GeoError::Numeric(format!("serialization: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes every file atomically, then `<stem>.manifest.json` listing their hashes.
fn emit(cfg: &RunConfig, out: &Path, command: &str, stem: &str, files: Vec<(String, Vec<u8>)>, details: Value) -> Result<()> {
    let mut outputs = BTreeMap::new();
    for (name, bytes) in &files {
        write_atomic(&out.join(name), bytes)?;
        outputs.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        command,
        seed: cfg.seed,
        config_sha256: cfg.hash(),
        inputs: cfg.section_hashes().into_iter().collect(),
        outputs,
        details,
    };
    write_atomic(&out.join(format!("{stem}.manifest.json")), &to_json(&manifest)?)
}

pub fn trace(cfg: &RunConfig, out: &Path, beta: Option<f64>, alpha: Option<f64>) -> Result<()> {
    let inputs = cfg.inputs()?;
    let beta = beta.unwrap_or(cfg.trace.beta);
    let alpha = alpha.unwrap_or(cfg.trace.alpha);
    if !beta.is_finite() || !alpha.is_finite() || alpha.abs() >= FRAC_PI_2 {
        return Err(GeoError::Config(format!(
            "influx point needs finite beta and |alpha| < π/2, got ({beta}, {alpha})"
        )));
    }
    let path = trace_influx_budget(&inputs.metric, &InfluxPoint::new(beta, alpha), cfg.trace.step, cfg.trace.tau_max)?;
    let mut csv = String::from("t,x1,x2,v1,v2\n");
    for s in &path.samples {
        let _ = writeln!(csv, "{},{},{},{},{}", s.t, s.x.x, s.x.y, s.v.x, s.v.y);
    }
    emit(
        cfg,
        out,
        "trace",
        "trace",
        vec![("trace.csv".into(), csv.into_bytes())],
        json!({"beta": beta, "alpha": alpha, "tau_plus": path.tau_plus, "samples": path.samples.len()}),
    )?;
    println!("trace: tau_plus = {}", path.tau_plus);
    Ok(())
}

pub fn sinogram(cfg: &RunConfig, out: &Path) -> Result<()> {
    let inputs = cfg.inputs()?;
    let mut s = ray_sinogram(&inputs.weight, &inputs.phantom, &inputs.fan, &inputs.metric, cfg.sinogram.quad_step)?;
    if cfg.sinogram.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let noisy = perturb(&s.flatten(), cfg.sinogram.noise, &mut rng);
        s.values = noisy.chunks(s.n).map(<[_]>::to_vec).collect();
    }
    emit(
        cfg,
        out,
        "sinogram",
        "sinogram",
        vec![("sinogram.csv".into(), s.to_csv().into_bytes())],
        json!({"rays": s.len(), "components": s.n, "noise": cfg.sinogram.noise, "weight": inputs.weight.kind()}),
    )?;
    println!("sinogram: {} rays x {} components", s.len(), s.n);
    Ok(())
}

fn summary(r: &ProbeReport) -> String {
    let outcome = serde_json::to_value(r.outcome)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    match r.metrics.get("rel_error") {
        Some(e) => format!("{}: {outcome} (rel_error = {e:.3e})", r.probe),
        None => format!("{}: {outcome}", r.probe),
    }
}

pub fn probe(cfg: &RunConfig, out: &Path, which: Probe) -> Result<()> {
    let thr = &cfg.thresholds;
    let (name, body, line) = match which {
        Probe::Global => {
            let inputs = cfg.inputs()?;
            let rec = global_run(&inputs.metric, &inputs.weight, &inputs.phantom, &inputs.fan, &cfg.grid, thr)?;
            let noise = if cfg.noise.is_empty() {
                Vec::new()
            } else {
                noise_floor(&rec, &cfg.noise, cfg.seed, thr)?
            };
            let line = summary(&rec.report);
            ("global", json!({"report": rec.report, "noise_floor": noise}), line)
        }
        Probe::Local => {
            let inputs = cfg.inputs()?;
            let r = local_probe(&inputs.metric, &inputs.weight, &inputs.phantom, &cfg.local, thr)?;
            let line = summary(&r);
            ("local", json!({"report": r}), line)
        }
        Probe::Strip => {
            let inputs = cfg.inputs()?;
            let r = strip_probe(
                &inputs.metric,
                &inputs.weight,
                &inputs.phantom,
                &inputs.fan,
                &cfg.strip,
                &cfg.grid,
                thr,
            )?;
            let line = summary(&r.report);
            ("strip", json!({"report": r.report, "ring_errors": r.ring_errors}), line)
        }
        Probe::Higgs => {
            let inputs = cfg.inputs()?;
            let field = cfg.higgs_field()?;
            let fan = fan_from_config(&cfg.higgs.fan)?;
            let r = higgs_probe(&inputs.metric, &field, &fan, &cfg.higgs.setup, thr, None)?;
            let line = format!("{} in {} iterations", summary(&r.report), r.iterations);
            ("higgs", json!({"report": r.report, "iterations": r.iterations}), line)
        }
        Probe::Wf => wf(cfg)?,
    };
    let file = format!("probe-{name}.json");
    emit(
        cfg,
        out,
        "probe",
        &format!("probe-{name}"),
        vec![(file, to_json(&body)?)],
        json!({"probe": name}),
    )?;
    println!("{line}");
    Ok(())
}

fn wf(cfg: &RunConfig) -> Result<(&'static str, Value, String)> {
    let w = &cfg.wf;
    match &w.distribution {
        Some(d) => {
            let dist = d.build()?;
            let classes = w
                .points
                .iter()
                .map(|p| wf_probe(&dist, &PhaseSpacePoint::new(p.z.clone(), p.zeta.clone())?, &w.setup))
                .collect::<Result<Vec<_>>>()?;
            let regular = classes.iter().filter(|c| c.regular).count();
            let line = format!("wf: {regular} of {} points regular", classes.len());
            Ok(("wf", json!({"distribution": d, "classifications": classes}), line))
        }
        None => {
            let inputs = cfg.inputs()?;
            let r = radon_wf_consistency(&inputs.metric, &w.disk, &default_probe_set(&w.disk), &w.radon)?;
            let line = format!("wf: {} probes, {} violations", r.probes.len(), r.violations);
            Ok(("wf", json!({"radon": r}), line))
        }
    }
}

pub fn operator_export(cfg: &RunConfig, out: &Path) -> Result<()> {
    let inputs = cfg.inputs()?;
    let basis = Arc::new(PixelBasis::new(cfg.grid.m)?);
    let op = assemble(&inputs.weight, &basis, &inputs.fan, &inputs.metric, cfg.grid.quad_step)?;
    let mut bytes = Vec::new();
    op.export(&mut bytes)?;
    let header = op.header();
    emit(
        cfg,
        out,
        "operator export",
        "operator",
        vec![("operator.gxop".into(), bytes)],
        serde_json::to_value(&header).map_err(|e| GeoError::Numeric(e.to_string()))?,
    )?;
    println!("operator: {} x {}", header.rows, header.cols);
    Ok(())
}
