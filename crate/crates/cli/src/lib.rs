//! Command-line front end of the heat content laboratory.

pub mod commands;
pub mod config;

use std::fmt;

/// Errors mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or parameter regime (exit code 2).
    Config(String),
    /// A numerical failure (exit code 3).
    Numerical(String),
    /// A verification check failed (exit code 4).
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<heatlab::Error> for CliError {
    fn from(e: heatlab::Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}
