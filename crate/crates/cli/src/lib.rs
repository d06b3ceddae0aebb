//! File formats and subcommands for the `gfdprop` runner.

pub mod commands;
pub mod fields;
pub mod report;
pub mod svg;

use std::path::PathBuf;

/// Every property held.
pub const EXIT_PASS: i32 = 0;
/// At least one property failed.
pub const EXIT_FAILURE: i32 = 1;
/// Bad usage, unreadable input or unwritable output.
pub const EXIT_USAGE: i32 = 2;
/// The simulation blew up.
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error("blowup at step {step}: {reason}")]
    Blowup { step: usize, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Blowup { .. } => EXIT_BLOWUP,
            _ => EXIT_USAGE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
