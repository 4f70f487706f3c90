//! Error type shared by every module of the crate.

use std::path::PathBuf;

use crate::jko::JkoStepDiagnostics;

/// Errors raised by density construction, functional evaluation, the JKO
/// stepper, the inequality checks and the persistence layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A fit or check received too few usable samples.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The inner solver of a JKO step could not bring the objective below
    /// its starting value.
    #[error("JKO step {step} failed: {reason}")]
    StepFailure {
        /// Index of the step that failed (1 for the first step).
        step: usize,
        /// Human readable cause.
        reason: String,
        /// Diagnostics of the failed attempt.
        diagnostics: Box<JkoStepDiagnostics>,
    },

    /// The finite-difference oracle left its domain of validity.
    #[error("finite-difference oracle aborted: {0}")]
    OracleAbort(String),

    /// Reading or writing a file failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        /// File or directory involved.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },

    /// A file was readable but its content is malformed.
    #[error("malformed file {path}: {reason}")]
    Format {
        /// Offending file.
        path: PathBuf,
        /// What was wrong with it.
        reason: String,
    },
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
