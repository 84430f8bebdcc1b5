use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    /// The estimated asymptotic variance is not positive; a longer
    /// estimation run is needed.
    #[error("estimation failure: {0}")]
    EstimationFailure(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("outside the validity regime: {0}")]
    OutOfRegime(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EstimationFailure(_) => 3,
            Error::Io(_) => 4,
            _ => 2,
        }
    }
}
