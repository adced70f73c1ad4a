use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
///
/// Each variant belongs to one [`ErrorKind`], which the CLI maps onto its
/// exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("malformed table: {0}")]
    Structure(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("singular value underflow at t = {t} (lambda = {value:e})")]
    SingularValueUnderflow { t: usize, value: f64 },

    #[error("matrix is not positive definite in {context}")]
    NotPositiveDefinite { context: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sweep {sweep}, block {block}: {source}")]
    Sweep {
        sweep: usize,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error classes, one per CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { .. } | Error::Parse { .. } | Error::Structure(_) | Error::Data(_) => {
                ErrorKind::Data
            }
            Error::Domain(_)
            | Error::SingularValueUnderflow { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::Contract(_)
            | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Sweep { source, .. } => source.kind(),
        }
    }

    pub(crate) fn in_sweep(self, sweep: usize, block: &'static str) -> Error {
        Error::Sweep {
            sweep,
            block,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
