//! Dense linear algebra and special-function kernels.
//!
//! Everything here is a pure function of its inputs. Matrices are small to
//! moderate (a few thousand rows at most), so plain dense algorithms are used
//! throughout: jittered Cholesky, cyclic Jacobi for symmetric eigenproblems,
//! column-pivoted Householder QR for least squares, and series / continued
//! fraction evaluation of the modified Bessel function `K_ν`.

mod bessel;
mod cholesky;
mod eigen;
mod lstsq;
mod matrix;

pub use bessel::bessel_k;
pub use cholesky::{cholesky_jittered, lower_mul_vec, CholeskyFactor, DEFAULT_JITTER_LADDER};
pub use eigen::{sym_eigen, EigenDecomposition, JACOBI_MAX_SWEEPS};
pub use lstsq::{least_squares, LeastSquaresFit, PivotedQr, RANK_TOLERANCE};
pub use matrix::{correlation, covariance, dot, mean, norm2, variance, Matrix, SymMatrix};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square: {rows} x {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is empty")]
    Empty,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not positive definite (largest jitter tried: {max_jitter:e})")]
    NotPositiveDefinite { max_jitter: f64 },

    #[error("invalid jitter ladder: {0}")]
    InvalidLadder(&'static str),

    #[error("eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("argument outside the function domain: {0}")]
    DomainError(String),
}
