use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm2, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    /// Orthonormal columns (tall) or rows (wide).
    #[default]
    Orthogonal,
    Gaussian {
        stddev: f64,
    },
}

/// Returns `a` with its columns orthonormalized by two passes of modified
/// Gram-Schmidt. Requires `rows ≥ cols`.
fn orthonormalize_columns(a: &Matrix) -> Matrix {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    for j in 0..n {
        for _pass in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let proj = dot(&done[k], &rest[0]);
                for (x, q) in rest[0].iter_mut().zip(&done[k]) {
                    *x -= proj * q;
                }
            }
        }
        let norm = norm2(&cols[j]);
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    Matrix::from_fn(m, n, |i, j| cols[j][i])
}

/// Random matrix with orthonormal columns when `rows ≥ cols`, orthonormal
/// rows otherwise, from a seeded Gaussian draw.
pub fn init_orthogonal(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng::seeded(seed);
    if rows >= cols {
        orthonormalize_columns(&rng::gaussian_matrix(&mut r, rows, cols, 1.0))
    } else {
        orthonormalize_columns(&rng::gaussian_matrix(&mut r, cols, rows, 1.0)).transpose()
    }
}

pub fn init_weight(init: Init, rows: usize, cols: usize, seed: u64) -> Matrix {
    match init {
        Init::Orthogonal => init_orthogonal(rows, cols, seed),
        Init::Gaussian { stddev } => {
            let mut r = rng::seeded(seed);
            rng::gaussian_matrix(&mut r, rows, cols, stddev)
        }
    }
}
