//! Command-line front end: run benchmark scenarios, verify standing
//! assumptions, and rebuild verdicts from stored trajectories.
//!
//! Exit codes: 0 all hard checks pass, 1 check failure, 2 config error,
//! 3 integration failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod csv_io;
mod plot;

/// CLI-level failure, mapped onto the exit-code contract by the commands.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    NotPositiveDefinite(String),
}

impl CliError {
    fn from_build(e: regsim_core::Error) -> Self {
        match e {
            regsim_core::Error::NotPositiveDefinite { .. } => {
                CliError::NotPositiveDefinite(e.to_string())
            }
            other => CliError::Config(other.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "{m}"),
            CliError::NotPositiveDefinite(m) => write!(f, "{m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "regsim",
    about = "Adaptive regulation to invariant sets: simulate benchmark scenarios and turn \
             the construction's stability devices into machine-checked verdicts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate scenarios, writing trajectory CSVs and verdict JSONs.
    Run {
        /// Config files (TOML) or builtin scenario names.
        #[arg(required = true)]
        configs: Vec<String>,
        /// Override the fixed integration step.
        #[arg(long, allow_negative_numbers = true)]
        h: Option<f64>,
        /// Override the horizon end time.
        #[arg(long = "t-end", allow_negative_numbers = true)]
        t_end: Option<f64>,
        /// Controller variant: theorem1 | theorem2.
        #[arg(long)]
        mode: Option<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also emit a self-contained SVG per scenario (informational).
        #[arg(long)]
        plot: bool,
        /// Run independent scenarios in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Sweep the standing-assumption inequalities without integrating.
    Verify {
        /// Config file (TOML) or builtin scenario name.
        config: String,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rebuild the verdict from a stored trajectory CSV.
    Report {
        /// Trajectory CSV produced by `run`.
        csv: PathBuf,
        /// The matching scenario config or builtin name.
        config: String,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { configs, h, t_end, mode, out, plot, jobs } => {
            let over = config::Overrides { h, t_end, mode };
            commands::cmd_run(&configs, &over, &out, plot, jobs)
        }
        Command::Verify { config, out } => commands::cmd_verify(&config, &out),
        Command::Report { csv, config, out } => commands::cmd_report(&csv, &config, &out),
    };
    ExitCode::from(code)
}
