//! Command-line interface: `stats`, `run`, `report` and `synth`
//! subcommands over the library pipeline.
//!
//! Exit codes: 0 success, 1 results produced but with warnings, 2
//! configuration or IO failure.

mod report_cmd;
mod run_cmd;
mod stats_cmd;
mod synth_cmd;

use std::ffi::OsString;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::ConfigError;
use crate::evaluate::EvaluateError;
use crate::eventlog::EventLogError;
use crate::predict::bundle::BundleError;
use crate::predict::PredictError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Message(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    EventLog(#[from] EventLogError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Evaluate(#[from] EvaluateError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Whether a command finished clean or with warnings already printed to
/// stderr.
pub type CmdResult = Result<bool, CliError>;

#[derive(Parser)]
#[command(
    name = "remtime",
    version,
    about = "Remaining-time prediction benchmark for business-process event logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print descriptive statistics of an event log
    Stats(stats_cmd::StatsArgs),
    /// Train, tune and evaluate the configured methods on one log
    Run(run_cmd::RunArgs),
    /// Aggregate run outputs into rankings and a Friedman test
    Report(report_cmd::ReportArgs),
    /// Generate a synthetic event log CSV
    Synth(synth_cmd::SynthArgs),
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point taking explicit arguments.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Stats(args) => stats_cmd::cmd_stats(&args),
        Command::Run(args) => run_cmd::cmd_run(&args),
        Command::Report(args) => report_cmd::cmd_report(&args),
        Command::Synth(args) => synth_cmd::cmd_synth(&args),
    };
    match outcome {
        Ok(false) => 0,
        Ok(true) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
