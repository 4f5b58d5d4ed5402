use thiserror::Error;

use crate::dual::GibbsSolution;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("trace is not one (got {0})")]
    InvalidTrace(f64),

    #[error("non-finite or out-of-range matrix entry")]
    NonFinite,

    #[error("eigendecomposition did not converge")]
    EigenFailure,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("moments are infeasible; separating direction {witness:?}")]
    Infeasible { witness: Vec<f64>, margin: f64 },

    #[error("feasibility undecided after {iterations} iterations (best margin {best_margin:e})")]
    Indeterminate { best_margin: f64, iterations: usize },

    #[error("multiplier norm {norm:e} exceeded cap; target moments look like a boundary point")]
    BoundarySuspected { norm: f64, lambda: Vec<f64> },

    #[error("dual solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NonConvergence {
        iterations: usize,
        grad_norm: f64,
        best: Box<GibbsSolution>,
    },

    #[error("boundary path failed at step {step}: {source}")]
    PathFailure {
        step: usize,
        path_trace: Vec<crate::dual::PathStep>,
        #[source]
        source: Box<Error>,
    },

    #[error("quantity unavailable for a boundary-limit solution (multipliers are not finite)")]
    IdentityUnavailable,

    #[error("threshold exceeded: {0}")]
    ThresholdExceeded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
