//! Dense linear algebra: the row-major [`Matrix`], Gram products, kernel
//! reshaping, a Jacobi eigensolver and the power-iteration spectral
//! estimator.

mod conv;
mod eigen;
pub mod io;
mod matrix;
mod power;

use thiserror::Error;

pub use conv::{reshape_conv, ConvTensor};
pub use eigen::{
    check_symmetric, singular_values, sym_eig_dominant, sym_eigen, sym_spectral_norm, EigPair, SymEigen, MAX_SWEEPS,
    OFF_DIAGONAL_TOL, SYMMETRY_TOL,
};
pub use matrix::{dot, frob_norm_sq, gram, norm2, Matrix};
pub use power::{
    power_iter, power_iter_sigma, power_iter_with, random_unit_vector, PowerEstimate, DEFAULT_POWER_ITERS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("data length mismatch: expected {expected}, got {got}")]
    DataLength { expected: usize, got: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric: |a[{row}][{col}] - a[{col}][{row}]| = {diff:e}")]
    NotSymmetric { row: usize, col: usize, diff: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("power iteration collapsed to the zero vector")]
    ZeroIterate,
    #[error("power iteration needs at least one round")]
    ZeroIterations,
}
