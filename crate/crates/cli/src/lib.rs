//! Library side of the `spinchain` command-line tool: configuration files,
//! output records and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod output;

use std::fmt;

/// Exit status for success.
pub const EXIT_OK: u8 = 0;
/// Exit status when a computation did not converge.
pub const EXIT_NOT_CONVERGED: u8 = 1;
/// Exit status for usage, configuration and input errors.
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Compute(_) => EXIT_NOT_CONVERGED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Compute(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<spinchain::Error> for CliError {
    fn from(e: spinchain::Error) -> Self {
        use spinchain::Error as E;
        match e {
            E::NotConverged { .. } | E::ScanAborted { .. } | E::BoundaryPeak { .. } | E::Linalg(_) => {
                CliError::Compute(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}
