use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the conformal testing library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Observations in one stream disagree on shape or labelling.
    #[error("incompatible observation: {0}")]
    Incompatible(String),

    /// A betting function produced a value that is not a valid multiplier.
    #[error("betting fault at step {step}: {reason}")]
    BettingFault { step: usize, reason: String },

    /// A statistic is undefined for the given input.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error in {path} at line {line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("validation error in {path} at line {line}: {reason}")]
    Validation {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("schema error in {path}: missing column {column:?}; available headers: {available:?}")]
    Schema {
        path: PathBuf,
        column: String,
        available: Vec<String>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by the contents of an input file rather than by
    /// a configuration parameter.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation { .. }
                | Error::Schema { .. }
                | Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::Incompatible(_)
                | Error::Degenerate(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
