//! Orthogonality regularizers for neural-network weight matrices.
//!
//! The crate provides value-and-gradient evaluation for soft orthogonality
//! (SO), double soft orthogonality (DSO), its selective variant, mutual
//! coherence (MC), spectral restricted isometry (SRIP) and spectral-norm
//! regularization (SR); a power-iteration spectral estimator; an
//! epoch-indexed coefficient schedule; exhaustive coherence and RIP
//! diagnostics; and a small deterministic training harness for comparing
//! regularized and unregularized runs.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod data;
pub mod gradcheck;
pub mod linalg;
pub mod regularizers;
pub mod rng;
pub mod schedule;
pub mod trainer;

pub use linalg::{ConvTensor, Matrix};
pub use regularizers::{RegKind, RegOptions, RegOutput, SripMode};
