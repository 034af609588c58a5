//! Central finite differences against the analytic regularizer gradients.

use crate::linalg::Matrix;
use crate::regularizers::{evaluate, kink_gap, RegError, RegKind, RegOptions};
use crate::rng;

pub const DEFAULT_STEP: f64 = 1e-6;
/// Trials whose selected maximum is within this of the runner-up are skipped.
pub const KINK_TOL: f64 = 1e-8;

/// `∂f/∂W_ij ≈ (f(W + hE_ij) − f(W − hE_ij)) / 2h` for every entry.
pub fn central_diff<F>(f: F, w: &Matrix, h: f64) -> Matrix
where
    F: Fn(&Matrix) -> f64,
{
    let (m, n) = w.shape();
    let mut probe = w.clone();
    let mut out = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let orig = w.get(i, j);
            probe.set(i, j, orig + h);
            let plus = f(&probe);
            probe.set(i, j, orig - h);
            let minus = f(&probe);
            probe.set(i, j, orig);
            out.set(i, j, (plus - minus) / (2.0 * h));
        }
    }
    out
}

/// `max_ij |a − b| / max(max|a|, max|b|)`, zero when both are zero.
pub fn relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    let scale = analytic.max_abs().max(numeric.max_abs());
    if scale == 0.0 {
        return 0.0;
    }
    let diff = analytic
        .as_slice()
        .iter()
        .zip(numeric.as_slice())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckOutcome {
    pub seed: u64,
    pub max_rel_error: f64,
    /// The input sat on a non-differentiable point and was not compared.
    pub skipped: bool,
}

impl GradCheckOutcome {
    pub fn passed(&self, tol: f64) -> bool {
        self.skipped || self.max_rel_error <= tol
    }
}

/// Test input: i.i.d. `N(0, 1/rows)` entries, so columns have roughly unit
/// norm.
pub fn random_weight(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng::seeded(seed);
    rng::gaussian_matrix(&mut r, rows, cols, 1.0 / (rows as f64).sqrt())
}

/// Compares the analytic gradient of `kind` at `w` with central differences.
pub fn check_at(kind: RegKind, w: &Matrix, lambda: f64, h: f64, opts: &RegOptions) -> Result<(f64, bool), RegError> {
    if let Some(gap) = kink_gap(kind, w, opts)? {
        if gap < KINK_TOL {
            return Ok((0.0, true));
        }
    }
    let analytic = evaluate(kind, w, lambda, opts)?.grad;
    let numeric = central_diff(
        |x| evaluate(kind, x, lambda, opts).map(|o| o.value).unwrap_or(f64::NAN),
        w,
        h,
    );
    Ok((relative_error(&analytic, &numeric), false))
}

pub fn check_seed(
    kind: RegKind,
    shape: (usize, usize),
    seed: u64,
    lambda: f64,
    h: f64,
    opts: &RegOptions,
) -> Result<GradCheckOutcome, RegError> {
    let w = random_weight(shape.0, shape.1, seed);
    let (max_rel_error, skipped) = check_at(kind, &w, lambda, h, opts)?;
    Ok(GradCheckOutcome {
        seed,
        max_rel_error,
        skipped,
    })
}
