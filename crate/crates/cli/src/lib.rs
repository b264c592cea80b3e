//! Scenario runner: reads a TOML scenario, runs intervention strategies and
//! writes plot-ready CSV files and `key: value` reports.

pub mod commands;
pub mod config;
pub mod format;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{ConfigError, Scenario, StrategyKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Feasible,
    Infeasible(String),
}

#[derive(Debug, Parser)]
#[command(name = "sirctl", version, about = "Run SIR intervention scenarios")]
pub struct Cli {
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Integration step in days; overrides `sim.dt`.
    #[arg(long, global = true, value_name = "DAYS")]
    pub dt: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured strategy.
    Run { config: PathBuf },
    /// Run several strategies and tabulate them.
    Compare {
        config: PathBuf,
        /// Comma-separated strategy names.
        #[arg(long)]
        strategies: String,
    },
    /// Write phase-plane data: trajectory and Lyapunov level curves.
    Phase { config: PathBuf },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

fn load(path: &std::path::Path, cli: &Cli) -> Result<Scenario, CliError> {
    let mut scn = Scenario::from_file(path)?;
    if let Some(dt) = cli.dt {
        scn = scn.with_dt(dt)?;
    }
    if let Some(out) = &cli.out {
        scn.out_dir = out.clone();
    }
    Ok(scn)
}

fn parse_strategies(list: &str) -> Result<Vec<StrategyKind>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(CliError::Usage))
        .collect()
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Run { config } => commands::run(&load(config, cli)?),
        Command::Compare { config, strategies } => {
            let kinds = parse_strategies(strategies)?;
            if kinds.is_empty() {
                return Err(CliError::Usage("--strategies needs at least one strategy".into()));
            }
            commands::compare(&load(config, cli)?, &kinds)
        }
        Command::Phase { config } => commands::phase(&load(config, cli)?),
    }
}
