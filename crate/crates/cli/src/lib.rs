//! Command-line front end for activefair.
//!
//! Exit codes: 0 on success, 1 when a run finishes but finds no equal-odds
//! solution (or a computation fails), 2 for usage and input errors.

pub mod commands;
pub mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use settings::Settings;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Infeasible(_) | CliError::Failed(_) => 1,
        }
    }

    pub(crate) fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }

    pub(crate) fn failed(e: impl std::fmt::Display) -> Self {
        CliError::Failed(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "activefair",
    version,
    about = "Fair classification with adaptive feature acquisition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a forest and write forest.json plus train_report.json.
    Train(CommandArgs),
    /// Evaluate one group-budget or individual policy on the test split.
    Audit(CommandArgs),
    /// Sweep policy families and write per-family operating points.
    Sweep(CommandArgs),
    /// Recompute equal-odds filtering and dominance from sweep tables.
    Report(CommandArgs),
}

#[derive(Debug, Args)]
pub struct CommandArgs {
    /// TOML file with the same keys as the flags (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

impl CommandArgs {
    pub fn resolve(&self) -> Result<Settings, CliError> {
        let file = match &self.config {
            Some(path) => Settings::from_toml_file(path)?,
            None => Settings::default(),
        };
        Ok(self.settings.clone().or(file))
    }
}

/// Runs a parsed command and returns the lines to print on success.
pub fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    match cli.command {
        Command::Train(args) => commands::train(&args.resolve()?),
        Command::Audit(args) => commands::audit(&args.resolve()?),
        Command::Sweep(args) => commands::sweep(&args.resolve()?),
        Command::Report(args) => commands::report(&args.resolve()?),
    }
}
