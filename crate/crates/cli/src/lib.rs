//! Command-line driver for the Gauss–Codazzi lab: configuration, the
//! subcommands and the acceptance suite.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod init;
pub mod validation;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const POSITIVITY: i32 = 2;
    pub const CFL: i32 = 3;
    pub const VALIDATION: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("admissibility error: {0}")]
    Admissibility(String),

    #[error(transparent)]
    Core(#[from] codazzi_core::Error),

    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("validation failed: {0} criteria did not pass")]
    Validation(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(codazzi_core::Error::PositivityLoss { .. }) => exit::POSITIVITY,
            CliError::Core(codazzi_core::Error::CflViolation { .. }) => exit::CFL,
            CliError::Validation(_) => exit::VALIDATION,
            _ => exit::CONFIG,
        }
    }

    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }
}
