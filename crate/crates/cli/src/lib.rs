//! Command-line front end for the `supermult` experiments.
//!
//! Every subcommand is turned into an [`config::ExperimentConfig`], run, and
//! written as a [`report::ReportRecord`]: one JSON line (appended) or a CSV
//! table. A config file accepted by `supermult run --config` has the same
//! shape as the `inputs` echoed in each report, plus optional `output` and
//! `format` keys.
//!
//! Exit codes: 0 success, 1 internal or I/O error, 2 usage or config error,
//! 3 resource guard.

use std::ffi::OsString;

use clap::Parser;

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod sweep;

use config::{ExperimentConfig, OutputOptions};
use error::{CliError, CliResult};
use report::{write_report, ReportRecord};

/// `{"params": ..., "optimizer": ...}` as echoed in reports.
pub fn inputs_of(config: &ExperimentConfig) -> CliResult<serde_json::Value> {
    let mut v = serde_json::to_value(config)
        .map_err(|e| CliError::Internal(format!("serialization: {e}")))?;
    if let Some(obj) = v.as_object_mut() {
        obj.shift_remove("command");
    }
    Ok(v)
}

/// Runs a resolved config and writes its report.
pub fn run_job(config: ExperimentConfig, output: &OutputOptions) -> CliResult<ReportRecord> {
    let config = config.resolved()?;
    let (outputs, timing) = commands::run(&config)?;
    let record = ReportRecord::new(
        config.experiment.name(),
        inputs_of(&config)?,
        outputs,
        timing,
    );
    write_report(&record, output.path.as_deref(), output.format)?;
    Ok(record)
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match cli::Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match parsed
        .command
        .into_job()
        .and_then(|(config, output)| run_job(config, &output))
    {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
