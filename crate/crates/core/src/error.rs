use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series failed to converge: {0}")]
    NonConvergence(String),

    #[error("quadrature tolerance not met: achieved {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("boundary form not supported: {0}")]
    FormMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
