//! `cri-rop`: simulation, reconstruction and analysis runs for compressive
//! radio-interferometric imaging.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error,
//! 3 validation-suite failure, 4 resource guard.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cri_core::operators::Backend;

use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("resource guard: {0}")]
    Resource(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Resource(_) => 4,
        }
    }
}

impl From<cri_core::Error> for CliError {
    fn from(e: cri_core::Error) -> Self {
        use cri_core::Error as E;
        match e {
            E::Config(_) | E::OutOfBand(..) => CliError::Config(e.to_string()),
            E::ResourceGuard(_) => CliError::Resource(e.to_string()),
            E::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "cri-rop",
    version,
    about = "Compressive radio interferometry with rank-one projections"
)]
struct Cli {
    /// TOML experiment configuration; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, global = true, env = "CRI_ROP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Runs the adjoint, equivalence and concentration suites.
    Validate {
        /// Test fixture: corrupts the MROP adjoint.
        #[arg(long, hide = true)]
        inject_broken_adjoint: bool,
    },
    /// Simulates measurements of a random sparse sky and reconstructs it.
    Reconstruct {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, value_parser = parse_backend)]
        backend: Option<Backend>,
    },
    /// Monte Carlo phase-transition sweep over the `[sweep]` grid.
    PhaseDiagram {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Time-domain acquisition: simulated antenna signals to compressed `z`.
    Acquire {
        /// Samples per batch.
        #[arg(long)]
        samples: Option<usize>,
        /// Also writes classical, Gaussian post-sensing and averaged outputs.
        #[arg(long)]
        side_by_side: bool,
    },
    /// Writes the antenna layout and visibility plan.
    MakeArray {
        #[arg(long)]
        num_per_arm: Option<usize>,
        #[arg(long)]
        batches: Option<usize>,
    },
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "nufft" => Ok(Backend::Nufft),
        "nudft" => Ok(Backend::Nudft),
        _ => Err(format!("unknown backend {s:?} (nufft or nudft)")),
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    match &cli.command {
        Command::Validate {
            inject_broken_adjoint,
        } => {
            cfg.validate.inject_broken_adjoint |= inject_broken_adjoint;
        }
        Command::Reconstruct { k, p, m, backend } => {
            cfg.sky.k = k.unwrap_or(cfg.sky.k);
            cfg.sensing.p = p.unwrap_or(cfg.sensing.p);
            cfg.sensing.m = m.unwrap_or(cfg.sensing.m);
            cfg.operator.backend = backend.unwrap_or(cfg.operator.backend);
        }
        Command::PhaseDiagram { trials } => {
            if let (Some(t), Some(sw)) = (trials, cfg.sweep.as_mut()) {
                sw.trials = *t;
            }
        }
        Command::Acquire {
            samples,
            side_by_side,
        } => {
            cfg.sensing.samples = samples.unwrap_or(cfg.sensing.samples);
            cfg.acquire.side_by_side |= side_by_side;
        }
        Command::MakeArray { num_per_arm, batches } => {
            cfg.array.num_per_arm = num_per_arm.unwrap_or(cfg.array.num_per_arm);
            cfg.array.num_batches = batches.unwrap_or(cfg.array.num_batches);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    std::fs::create_dir_all(&cfg.output.dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", cfg.output.dir.display())))?;
    let manifest = match cli.command {
        Command::Validate { .. } => commands::validate(&cfg)?,
        Command::Reconstruct { .. } => commands::reconstruct(&cfg)?,
        Command::PhaseDiagram { .. } => commands::phase_diagram(&cfg)?,
        Command::Acquire { .. } => commands::acquire(&cfg)?,
        Command::MakeArray { .. } => commands::make_array(&cfg)?,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&manifest.summary).unwrap_or_default()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
