//! Error taxonomy shared by the whole crate.

use thiserror::Error;

/// Errors produced by estimation, simulation, tuning, and data handling.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition: dimension
    /// mismatch, empty input, non-positive regularizer, and so on.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input is formally valid but numerically unusable, e.g. all points
    /// identical so no bandwidth can be derived, or a training split that
    /// contains a single treatment arm.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A dense linear-algebra routine failed (factorization of a matrix that
    /// is not positive definite, eigensolver non-convergence, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The configuration file or command-line settings are inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A data file could not be parsed or violates the documented schema.
    #[error("data error: {0}")]
    Data(String),

    /// Every grid point of a hyperparameter search failed.
    #[error("tuning failed: {0}")]
    Tuning(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Data(format!("csv: {other:?}")),
        }
    }
}

/// Convenience alias used by every fallible function in this crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line tools:
    /// 2 for configuration problems, 3 for data problems, 4 for numeric
    /// failures. Success is 0.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Data(_) | Error::DegenerateInput(_) | Error::Io(_) => 3,
            Error::Numeric(_) | Error::Tuning(_) => 4,
        }
    }
}
