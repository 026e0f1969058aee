//! Batch driver: reads a TOML experiment description, runs one subcommand on
//! a rayon pool of the requested size and writes CSV, JSON and SVG artifacts
//! tagged with the config hash and seed.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use artifact::{Artifacts, Provenance};
use commands::Check;
pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Free Landau spectrum: bottom and first excited cluster.
    FreeSpectrum,
    /// Monte-Carlo integrated density of states.
    Ids,
    /// Monte-Carlo heat trace.
    Laplace,
    /// Tail exponent fit against the closed-form prediction.
    TailFit,
    /// Heat trace against the Stieltjes transform of the IDS.
    Tauberian,
    /// Torsion function of a perforated square and the clearing heuristic.
    Green,
    /// Rearrangement lower bound against computed ground states.
    IsoCheck,
    /// Gaussian, compact and stretched profiles side by side.
    Regimes,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FreeSpectrum => "free-spectrum",
            Command::Ids => "ids",
            Command::Laplace => "laplace",
            Command::TailFit => "tail-fit",
            Command::Tauberian => "tauberian",
            Command::Green => "green",
            Command::IsoCheck => "iso-check",
            Command::Regimes => "regimes",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lifschitz", version, about = "Lifschitz tails of magnetic random Schroedinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment file; built-in defaults otherwise.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `outputs.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Base seed (overrides `numerics.base_seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub command: Command,
    pub config_sha256: String,
    pub seed: u64,
    pub artifacts: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

/// Loads the config, applies the flag overrides and runs.
pub fn execute(cli: &Cli) -> Result<RunSummary, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.outputs.dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.numerics.base_seed = seed;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run(cli.command, &cfg))
}

/// Runs one subcommand. With `outputs.assert`, failed checks become
/// [`CliError::Contract`] after the artifacts are written.
pub fn run(command: Command, cfg: &ExperimentConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let hash = cfg.hash()?;
    let seed = cfg.numerics.base_seed;
    let mut art = Artifacts::new(&cfg.outputs.dir, Provenance::new(command.name(), hash.clone(), seed))?;
    let checks = match command {
        Command::FreeSpectrum => commands::free_spectrum(cfg, &mut art)?,
        Command::Ids => commands::ids(cfg, &mut art)?,
        Command::Laplace => commands::laplace(cfg, &mut art)?,
        Command::TailFit => commands::tail_fit(cfg, &mut art)?,
        Command::Tauberian => commands::tauberian(cfg, &mut art)?,
        Command::Green => commands::green(cfg, &mut art)?,
        Command::IsoCheck => commands::iso_check(cfg, &mut art)?,
        Command::Regimes => commands::regimes(cfg, &mut art)?,
    };
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if cfg.outputs.assert && !failed.is_empty() {
        return Err(CliError::Contract(format!("{} failed: {}", command.name(), failed.join(", "))));
    }
    Ok(RunSummary { command, config_sha256: hash, seed, artifacts: art.written, checks })
}
