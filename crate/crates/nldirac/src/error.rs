//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by grid construction, solvers, and spectral routines.
#[derive(Debug, Error)]
pub enum NldError {
    /// Invalid grid or operator input (sizes, parameter ranges).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine produced a non-finite value.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// Newton iteration failed to converge.
    #[error("Newton did not converge after {iters} iterations (residual {residual:.3e}): {context}")]
    NewtonFailed {
        iters: usize,
        residual: f64,
        context: String,
    },

    /// An iterate collapsed to the zero solution.
    #[error("iteration collapsed toward the zero solution: {0}")]
    CollapseToZero(String),

    /// Dense eigensolve refused: matrix larger than the configured cap.
    #[error("matrix size {size} exceeds the dense eigensolver cap {cap}")]
    EigCapExceeded { size: usize, cap: usize },

    /// LAPACK backend failure.
    #[error("linear algebra backend error: {0}")]
    Backend(String),

    /// An eigenvalue failed the grid-refinement stability check.
    #[error("refinement-stability check failed: {0}")]
    NotRefinementStable(String),

    /// Fixed-point iteration left its contraction ball.
    #[error("fixed-point iterate left the ball of radius {radius:.3e} (norm {norm:.3e})")]
    BallExit { radius: f64, norm: f64 },

    /// Fixed-point iteration shows no contraction.
    #[error("fixed-point iteration is not contracting: {0}")]
    NoContraction(String),

    /// Requested quantity does not exist (e.g. no real eigenvalue pair).
    #[error("not found: {0}")]
    NotFound(String),

    /// I/O error from file-producing helpers.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, NldError>;
