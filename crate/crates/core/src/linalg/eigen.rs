//! Cyclic Jacobi eigensolver for small dense symmetric matrices.
//!
//! Each sweep visits every `(p, q)` pair above the diagonal and applies the
//! plane rotation that annihilates `a[p][q]`. Rotations are accumulated into
//! the eigenvector matrix. The iteration stops when the off-diagonal
//! Frobenius norm drops below `OFF_DIAGONAL_TOL · max(1, ‖A‖_F)`.

use super::{frob_norm_sq, LinalgError, Matrix};

/// Entrywise tolerance for `|a_ij − a_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    pub value: f64,
    /// Unit-norm eigenvector as a single-column matrix.
    pub vector: Matrix,
}

/// Full spectrum of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: Matrix,
}

impl SymEigen {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.col(k)
    }

    /// Index of the eigenvalue with the largest magnitude. On equal
    /// magnitudes the positive one wins.
    pub fn dominant_index(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate().skip(1) {
            let b = self.values[best];
            if v.abs() > b.abs() || (v.abs() == b.abs() && v > b) {
                best = k;
            }
        }
        best
    }
}

pub fn check_symmetric(a: &Matrix) -> Result<(), LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (a.get(i, j) - a.get(j, i)).abs();
            if diff > SYMMETRY_TOL {
                return Err(LinalgError::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    Ok(())
}

fn off_diagonal_sq(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j).powi(2);
            }
        }
    }
    s
}

pub fn sym_eigen(a: &Matrix) -> Result<SymEigen, LinalgError> {
    check_symmetric(a)?;
    let n = a.rows();
    // Work on the exactly symmetrized copy so rotations see one value per pair.
    let mut m = Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
    let mut v = Matrix::identity(n);
    let tol = OFF_DIAGONAL_TOL * frob_norm_sq(&m).sqrt().max(1.0);

    let mut converged = off_diagonal_sq(&m).sqrt() <= tol;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence {
                sweeps,
                off_norm: off_diagonal_sq(&m).sqrt(),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
        sweeps += 1;
        converged = off_diagonal_sq(&m).sqrt() <= tol;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).total_cmp(&m.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&k| m.get(k, k)).collect();
    let mut vectors = Matrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    for j in 0..n {
        canonicalize_sign(&mut vectors, j);
    }
    Ok(SymEigen { values, vectors })
}

fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = m.get(p, q);
    if apq == 0.0 {
        return;
    }
    let n = m.rows();
    let app = m.get(p, p);
    let aqq = m.get(q, q);
    let tau = (aqq - app) / (2.0 * apq);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = m.get(k, p);
        let akq = m.get(k, q);
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        m.set(k, p, new_p);
        m.set(p, k, new_p);
        m.set(k, q, new_q);
        m.set(q, k, new_q);
    }
    m.set(p, p, app - t * apq);
    m.set(q, q, aqq + t * apq);
    m.set(p, q, 0.0);
    m.set(q, p, 0.0);

    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Flips column `j` so its largest-magnitude entry is positive.
fn canonicalize_sign(v: &mut Matrix, j: usize) {
    let n = v.rows();
    let mut best = 0;
    for i in 1..n {
        if v.get(i, j).abs() > v.get(best, j).abs() {
            best = i;
        }
    }
    if v.get(best, j) < 0.0 {
        for i in 0..n {
            v.set(i, j, -v.get(i, j));
        }
    }
}

/// Eigenpair whose eigenvalue has the largest magnitude; `|value|` is the
/// spectral norm of `a`.
pub fn sym_eig_dominant(a: &Matrix) -> Result<EigPair, LinalgError> {
    let eig = sym_eigen(a)?;
    let k = eig.dominant_index();
    Ok(EigPair {
        value: eig.values[k],
        vector: Matrix::column_vector(&eig.vector(k)),
    })
}

/// Spectral norm of a symmetric matrix via the full Jacobi spectrum.
pub fn sym_spectral_norm(a: &Matrix) -> Result<f64, LinalgError> {
    Ok(sym_eig_dominant(a)?.value.abs())
}

/// Singular values of `w`, descending, from the spectrum of `WᵀW`.
pub fn singular_values(w: &Matrix) -> Result<Vec<f64>, LinalgError> {
    let eig = sym_eigen(&super::gram(w))?;
    Ok(eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect())
}
