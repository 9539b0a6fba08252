//! Command-line front end for the remote-state-preparation models: TOML
//! configs in, CSV out.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use commands::{cmd_curve, cmd_map, cmd_qkd, cmd_verify, Report};
pub use config::{ConfigFile, RunConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

/// Exit status for a completed run: 0, or 2 when a check failed.
pub fn exit_code(report: &Report) -> i32 {
    if report.passed {
        0
    } else {
        2
    }
}

/// Writes the CSV to `out`, or to stdout when no path is given.
pub fn emit(report: &Report, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, &report.csv).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
        }
        None => match std::io::stdout().lock().write_all(report.csv.as_bytes()) {
            // a closed reader (e.g. `| head`) is not an error
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
            _ => Ok(()),
        },
    }
}
