use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain where the model or an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or invalid scenario configuration.
    #[error("config error: {0}")]
    Config(String),

    /// A configuration file could not be parsed.
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// A preset's parameters or initial data fail the hypotheses it is meant to exercise.
    #[error("hypothesis check failed for preset `{preset}`: {reason}")]
    Hypothesis { preset: String, reason: String },

    /// Time stepping could not proceed (step underflow without growth, persistent NaN/Inf).
    #[error("numerical failure at t = {t}: {reason}")]
    NumericalFailure { t: f64, reason: String },

    #[error("eigensolver failure: {0}")]
    Eigen(String),

    /// Too little data to draw a conclusion (short fit window, unresolved profile range).
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NumericalFailure { .. } => 2,
            _ => 1,
        }
    }
}
