//! Crate-wide error type.

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model construction, data ingestion and estimation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter violates its domain constraint (e.g. a non-positive rate).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The recovery hazard is undefined at or past the end of the kernel support.
    #[error("hazard undefined at t = {t}: kernel support ends at {support_end}")]
    SingularHazard { t: f64, support_end: f64 },

    /// The marked branching factor has no finite expectation.
    #[error("divergent branching factor: rho = {rho} must be below alpha - 1 = {limit}")]
    DivergentBranching { rho: f64, limit: f64 },

    /// A data row failed validation while reading a file.
    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    /// A statistical test was handed fewer observations than it supports.
    #[error("insufficient sample: need at least {need} values, got {got}")]
    InsufficientSample { need: usize, got: usize },

    /// An operation precondition was not met by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 2,
            Error::Csv(e) if e.is_io_error() => 2,
            _ => 1,
        }
    }
}
