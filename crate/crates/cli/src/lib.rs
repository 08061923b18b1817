//! `crooks-lab`: batch runner that turns a TOML configuration into a run
//! directory of CSV/JSON artifacts plus a hashed manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::Outcome;
pub use config::{Config, RunMode};
pub use error::CliError;
pub use output::{RunDir, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "crooks-lab", version, about = "Work statistics, pulse design and readout simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory; defaults to `runs/<command>`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "CROOKS_LAB_THREADS")]
    pub threads: Option<usize>,
    /// Exact probabilities, Monte Carlo sampling, or both (`tpm` only).
    #[arg(long, global = true, value_enum)]
    pub mode: Option<RunMode>,
    /// Evaluate the constant-amplitude comparison pulse (`pulse` only).
    #[arg(long, global = true)]
    pub naive_square: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fluctuation-theorem test over a (τ, hβ) grid.
    Tpm,
    /// Adiabaticity parameter for each switching time.
    Gamma,
    /// Robust selective π-pulse design and its robustness map.
    Pulse,
    /// Photon-count histogram, telegraph trace and readout fidelity.
    Readout,
    /// Inverse temperatures from tabulated initial populations.
    Table1,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tpm => "tpm",
            Self::Gamma => "gamma",
            Self::Pulse => "pulse",
            Self::Readout => "readout",
            Self::Table1 => "table1",
        }
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
    pub outcome: Outcome,
}

/// Configuration after applying command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(mode) = cli.mode {
        cfg.tpm.mode = mode;
    }
    if cli.naive_square {
        cfg.pulse.naive_square = true;
    }
    cfg.validate("")?;
    Ok(cfg)
}

/// Runs one subcommand. Artifacts and the manifest are written even when the
/// outcome carries a numerical failure.
pub fn run(cli: &Cli) -> Result<RunReport, CliError> {
    let cfg = resolve_config(cli)?;
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(cli.command.name()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {} threads: {e}", cfg.threads)))?;
    let mut dir = RunDir::create(&out_dir)?;
    let outcome = pool.install(|| match cli.command {
        Command::Tpm => commands::cmd_tpm(&cfg, &mut dir),
        Command::Gamma => commands::cmd_gamma(&cfg, &mut dir),
        Command::Pulse => commands::cmd_pulse(&cfg, &mut dir),
        Command::Readout => commands::cmd_readout(&cfg, &mut dir),
        Command::Table1 => commands::cmd_table1(&cfg, &mut dir),
    })?;
    let manifest = dir.write_manifest(cli.command.name(), &cfg)?;
    Ok(RunReport {
        out_dir,
        manifest,
        outcome,
    })
}
