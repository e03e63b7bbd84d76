use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),

    /// Objective evaluation produced NaN/Inf at the given particle.
    #[error("objective value at particle {index} is not finite")]
    NonFiniteObjective { index: usize },

    /// Portfolio variance quadratic form collapsed below the epsilon
    /// guard (constant-price window).
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
