//! Two-step power iteration for the spectral norm of a symmetric operator.
//!
//! One round is `u ← A v`, `v ← A u`, with the estimate `‖v‖ / ‖u‖`. The
//! iterate is renormalized at the start of each round; the ratio is scale
//! invariant so this only guards against overflow.

use rand_distr::{Distribution, StandardNormal};

use super::{norm2, LinalgError, Matrix};
use crate::rng;

/// Default number of rounds.
pub const DEFAULT_POWER_ITERS: usize = 2;

/// Norms at or below this are treated as an exactly vanishing iterate.
const ZERO_NORM: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerEstimate {
    pub sigma: f64,
    /// Final iterate `v` scaled to unit length; approximates the dominant
    /// eigenvector.
    pub direction: Vec<f64>,
}

/// Uniformly distributed point on the unit sphere in `ℝⁿ`.
pub fn random_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::seeded(seed);
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = norm2(&v);
        if norm > ZERO_NORM {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Power iteration against an arbitrary symmetric linear operator.
///
/// `noise_floor` is the rounding level of `apply` on a unit vector: images
/// at or below it are treated as exactly zero. Without it an operator that
/// vanishes in exact arithmetic (WᵀW − I for orthonormal W) would report
/// the ratio of two rounding residues.
// Norm tests are negated so a NaN norm counts as vanishing.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn power_iter_with<F>(apply: F, iters: usize, start: &[f64], noise_floor: f64) -> Result<PowerEstimate, LinalgError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if iters == 0 {
        return Err(LinalgError::ZeroIterations);
    }
    let start_norm = norm2(start);
    if !(start_norm > ZERO_NORM) {
        return Err(LinalgError::ZeroIterate);
    }
    let floor = noise_floor.max(ZERO_NORM);
    let mut v: Vec<f64> = start.iter().map(|x| x / start_norm).collect();
    let mut sigma = 0.0;
    for _ in 0..iters {
        let u = apply(&v);
        let u_norm = norm2(&u);
        if !(u_norm > floor) {
            return Err(LinalgError::ZeroIterate);
        }
        let next = apply(&u);
        let v_norm = norm2(&next);
        sigma = v_norm / u_norm;
        if !(v_norm > floor * u_norm) {
            // A annihilates u: estimate is 0 and u is the best direction we have.
            return Ok(PowerEstimate {
                sigma: 0.0,
                direction: u.iter().map(|x| x / u_norm).collect(),
            });
        }
        v = next.into_iter().map(|x| x / v_norm).collect();
    }
    Ok(PowerEstimate { sigma, direction: v })
}

pub fn power_iter(a: &Matrix, iters: usize, start: &[f64]) -> Result<PowerEstimate, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if start.len() != a.cols() {
        return Err(LinalgError::ShapeMismatch {
            op: "power_iter",
            left: a.shape(),
            right: (start.len(), 1),
        });
    }
    power_iter_with(|x| a.matvec(x), iters, start, 0.0)
}

/// Spectral-norm estimate of the symmetric matrix `a` from a seeded random
/// start vector.
///
/// Never exceeds the true spectral norm (up to rounding). Returns
/// [`LinalgError::ZeroIterate`] when `a` maps the iterate to zero; callers
/// read that as σ = 0.
pub fn power_iter_sigma(a: &Matrix, iters: usize, seed: u64) -> Result<f64, LinalgError> {
    let start = random_unit_vector(a.cols(), seed);
    Ok(power_iter(a, iters, &start)?.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig_dominant;

    #[test]
    fn diagonal_is_exact_after_one_round() {
        let a = Matrix::from_rows(&[&[3.0, 0.0], &[0.0, 0.0]]);
        for seed in 0..20 {
            let s = power_iter_sigma(&a, 1, seed).unwrap();
            assert!((s - 3.0).abs() <= 4.0 * f64::EPSILON, "{s}");
        }
    }

    #[test]
    fn zero_matrix_reports_zero_iterate() {
        let a = Matrix::zeros(2, 2);
        assert!(matches!(power_iter_sigma(&a, 2, 7), Err(LinalgError::ZeroIterate)));
    }

    #[test]
    fn zero_iterations_rejected() {
        let a = Matrix::identity(2);
        assert!(matches!(power_iter_sigma(&a, 0, 7), Err(LinalgError::ZeroIterations)));
    }

    #[test]
    fn direction_aligns_with_dominant_eigenvector() {
        let a = Matrix::from_rows(&[&[2.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, 0.5]]);
        let start = random_unit_vector(3, 11);
        let est = power_iter(&a, 30, &start).unwrap();
        let exact = sym_eig_dominant(&a).unwrap();
        let cos: f64 = est
            .direction
            .iter()
            .zip(exact.vector.as_slice())
            .map(|(x, y)| x * y)
            .sum();
        assert!((cos.abs() - 1.0).abs() < 1e-12);
        assert!((est.sigma - 3.0).abs() < 1e-12);
    }

    #[test]
    fn random_unit_vector_is_seeded() {
        let a = random_unit_vector(5, 3);
        assert_eq!(a, random_unit_vector(5, 3));
        assert_ne!(a, random_unit_vector(5, 4));
        assert!((norm2(&a) - 1.0).abs() < 1e-15);
    }
}
