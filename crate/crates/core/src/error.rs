//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the estimation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent configuration (mismatched grids, bad bin specs, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Invalid observations (times outside the window, malformed rows, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Invalid distribution or algorithm parameter.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A numerical routine failed to converge or produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for the CLI: 2 usage/config, 3 data/io, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
