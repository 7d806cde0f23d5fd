use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A jump-size law failed a construction invariant.
    #[error("invalid jump law: {0}")]
    InvalidLaw(String),
    /// A quadrature or series evaluation did not converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Inputs are structurally unusable (empty samples, too few buckets, ...).
    #[error("usage error: {0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
