use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry encountered: {0}")]
    NonFinite(String),

    #[error("instance too large for exact computation: {0}")]
    TooLarge(String),

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e} below tolerance {tol:.3e}")]
    NotPsd { min_eig: f64, tol: f64 },

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("empty cluster {0}")]
    EmptyCluster(usize),

    #[error("k-means failed: {0}")]
    KMeansFailure(String),

    #[error("cluster count mismatch: {0}")]
    KMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}
