//! `geoxrt`: traces, sinograms, probes and operator export from a JSON run
//! configuration.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use geoxrt::config::RunConfig;
use geoxrt::GeoError;

#[derive(Debug, Parser)]
#[command(name = "geoxrt", version, about = "Geodesic ray transforms on analytic disks")]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized steps (overrides `seed` in the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "GEOXRT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace one influx geodesic and write `t,x1,x2,v1,v2`.
    Trace {
        #[arg(long, allow_negative_numbers = true)]
        beta: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        alpha: Option<f64>,
    },
    /// Sample the weighted ray transform of the phantom over the fan.
    Sinogram,
    /// Run an injectivity or wavefront probe and write its report.
    Probe { which: Probe },
    /// Forward operator utilities.
    Operator {
        #[command(subcommand)]
        action: OperatorAction,
    },
}

#[derive(Debug, Subcommand)]
enum OperatorAction {
    /// Assemble the operator on the pixel grid and write it in binary form.
    Export,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Probe {
    Global,
    Local,
    Strip,
    Higgs,
    Wf,
}

fn load(cli: &Cli) -> geoxrt::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| GeoError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text).map_err(|e| match e {
                GeoError::Config(msg) => GeoError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn threads(n: Option<usize>) -> geoxrt::Result<()> {
    let Some(n) = n else { return Ok(()) };
    if n == 0 {
        return Err(GeoError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| GeoError::Config(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> geoxrt::Result<()> {
    threads(cli.threads)?;
    let cfg = load(cli)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Trace { beta, alpha } => commands::trace(&cfg, &out, *beta, *alpha),
        Command::Sinogram => commands::sinogram(&cfg, &out),
        Command::Probe { which } => commands::probe(&cfg, &out, *which),
        Command::Operator {
            action: OperatorAction::Export,
        } => commands::operator_export(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("geoxrt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
