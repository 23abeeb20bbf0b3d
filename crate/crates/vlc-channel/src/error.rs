//! Crate-wide error type, split along the boundaries the CLI reports:
//! domain (caller misuse), data (malformed or inconsistent input), and
//! numerical (a computation that cannot proceed).

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on arguments was violated (bad orders, negative
    /// amplitude, cutoff outside the Nyquist range, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data is malformed or internally inconsistent (unparseable CSV
    /// row, nonpositive gain, duplicate grid position, missing reference).
    #[error("data error: {0}")]
    Data(String),

    /// A numerical operation cannot produce a meaningful result
    /// (rank-deficient design matrix, singular inverse-link prediction,
    /// degenerate spectrum).
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable category name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Data(_) => "data",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code convention: 2 usage, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numerical(_) => 4,
        }
    }
}
