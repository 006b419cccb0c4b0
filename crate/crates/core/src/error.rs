use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid cross sections: {0}")]
    InvalidCrossSection(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("sweep ordering error: {0}")]
    Ordering(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("rejected data: {0}")]
    Data(String),

    #[error("ill-conditioned reduction: {0}")]
    IllConditioned(String),

    #[error("source iteration did not converge at step {step} after {iterations} iterations (update norm {update_norm:e})")]
    NotConverged {
        step: usize,
        iterations: usize,
        update_norm: f64,
    },

    #[error("run comparison error: {0}")]
    Comparison(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
