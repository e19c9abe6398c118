use thiserror::Error;

/// Errors produced by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at dataset point {index} ({point:?})")]
    NonFiniteSample {
        index: usize,
        point: Vec<f64>,
        value: f64,
    },

    #[error("non-finite kernel value at matrix entry ({i}, {j})")]
    NonFiniteKernel { i: usize, j: usize },

    #[error("quadrature failed to reach relative tolerance {tol:e} (q = {q}, phi = {phi})")]
    QuadratureFailure { q: f64, phi: f64, tol: f64 },

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),

    #[error("Cholesky factorization failed after {attempts} jitter escalations (last jitter {jitter:e})")]
    CholeskyFailure { attempts: usize, jitter: f64 },

    #[error("kernel has no diagonal power-law singularity: {0}")]
    NoSingularity(String),

    #[error("unsupported kernel for this operation: {0}")]
    UnsupportedKernel(String),

    #[error("training diverged: non-finite loss at step {step}")]
    TrainingDiverged { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
