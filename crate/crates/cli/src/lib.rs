//! Command-line workflows over `stirep-core`.

pub mod commands;
pub mod config;
pub mod table;

use clap::{Parser, Subcommand};

pub use config::{Overrides, RunConfig};

/// Exit status for a run whose report found values out of tolerance.
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] stirep_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    ChecksFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_convergence_failure() => 2,
            CliError::ChecksFailed(_) => EXIT_CHECK_FAILED,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "stirep", version, about = "Robust optimal pulses for three-level Lambda transfer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Solve for the multipliers of one extremum (--phidot-i)
    Solve,
    /// Follow the family of extrema across --grid
    Sweep,
    /// Pulse shapes and angles of an extremum or of the reference pair
    Synthesize,
    /// Propagate |1> under the pulses at one --eps and --gamma
    Simulate,
    /// Fidelity versus amplitude error over --eps-range
    Profile,
    /// Recompute the table of highlighted extrema and compare
    Table,
    /// Run the analytic cross-checks, one JSON line per check
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Synthesize => "synthesize",
            Command::Simulate => "simulate",
            Command::Profile => "profile",
            Command::Table => "table",
            Command::Verify => "verify",
        }
    }
}

/// Merges flags over the config file, validates, and runs the command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.overrides.config {
        Some(path) => Overrides::read_config(path)?,
        None => Overrides::default(),
    };
    let cfg = RunConfig::resolve(cli.command.name(), cli.overrides.or(file))?;
    if let Some(jobs) = cfg.jobs {
        // fails only if a pool already exists, e.g. when called twice in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    commands::dispatch(cli.command, &cfg)
}
