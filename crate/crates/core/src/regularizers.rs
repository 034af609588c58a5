//! Orthogonality penalties on a weight matrix `W ∈ ℝ^{m×n}` with their
//! analytic gradients.
//!
//! | kind           | value                              | gradient                          |
//! |----------------|------------------------------------|-----------------------------------|
//! | `So`           | λ‖WᵀW − I‖²_F                      | 4λ W (WᵀW − I)                    |
//! | `Dso`          | λ(‖WᵀW − I‖²_F + ‖WWᵀ − I‖²_F)     | 4λ [W(WᵀW − I) + (WWᵀ − I)W]      |
//! | `SelectiveSo`  | `So` if m > n, row-Gram `So` else  | matching branch                   |
//! | `Mc`           | λ max_ij \|(WᵀW − I)_ij\|          | subgradient at the argmax entry   |
//! | `Srip`         | λ σ(WᵀW − I)                       | 2λ s W v vᵀ                       |
//! | `Sr`           | (λ/2) σ(W)²                        | λ W v vᵀ                          |
//!
//! For `Srip`, `(μ, v)` is the dominant eigenpair of `WᵀW − I` and
//! `s = sign(μ)`. For `Sr`, `v` is the top eigenvector of `WᵀW`. The
//! coefficient is folded into both value and gradient.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    frob_norm_sq, gram, norm2, power_iter_with, random_unit_vector, sym_eigen, LinalgError, Matrix, PowerEstimate,
    DEFAULT_POWER_ITERS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegError {
    #[error("regularization coefficient must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    None,
    So,
    Dso,
    SelectiveSo,
    Mc,
    Srip,
    Sr,
}

impl RegKind {
    pub const ALL: [RegKind; 7] = [
        RegKind::None,
        RegKind::So,
        RegKind::Dso,
        RegKind::SelectiveSo,
        RegKind::Mc,
        RegKind::Srip,
        RegKind::Sr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RegKind::None => "none",
            RegKind::So => "so",
            RegKind::Dso => "dso",
            RegKind::SelectiveSo => "selective_so",
            RegKind::Mc => "mc",
            RegKind::Srip => "srip",
            RegKind::Sr => "sr",
        }
    }
}

impl fmt::Display for RegKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RegKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase().replace('-', "_");
        RegKind::ALL.into_iter().find(|k| k.name() == lower).ok_or_else(|| {
            format!("unknown regularizer {s:?} (expected one of none, so, dso, selective_so, mc, srip, sr)")
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SripMode {
    /// Dominant eigenpair from the Jacobi solver.
    Exact,
    /// Power-iteration estimate.
    #[default]
    Power,
}

impl FromStr for SripMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(SripMode::Exact),
            "power" => Ok(SripMode::Power),
            _ => Err(format!("unknown SRIP mode {s:?} (expected exact or power)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegOutput {
    pub value: f64,
    pub grad: Matrix,
}

impl RegOutput {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            value: 0.0,
            grad: Matrix::zeros(rows, cols),
        }
    }

    fn transposed(self) -> Self {
        Self {
            value: self.value,
            grad: self.grad.transpose(),
        }
    }
}

/// Knobs that only some kinds read.
#[derive(Debug, Clone, PartialEq)]
pub struct RegOptions {
    pub srip_mode: SripMode,
    pub power_iters: usize,
    pub seed: u64,
    /// Restrict the `Mc` maximum to off-diagonal Gram entries.
    pub mc_off_diagonal_only: bool,
}

impl Default for RegOptions {
    fn default() -> Self {
        Self {
            srip_mode: SripMode::Power,
            power_iters: DEFAULT_POWER_ITERS,
            seed: 0,
            mc_off_diagonal_only: false,
        }
    }
}

impl RegOptions {
    pub fn exact() -> Self {
        Self {
            srip_mode: SripMode::Exact,
            ..Self::default()
        }
    }
}

fn check_lambda(lambda: f64) -> Result<(), RegError> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(RegError::InvalidLambda(lambda))
    }
}

/// `a bᵀ` for column vectors `a` and `b`.
fn outer(a: &[f64], b: &[f64]) -> Matrix {
    Matrix::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
}

pub fn so(w: &Matrix, lambda: f64) -> Result<RegOutput, RegError> {
    check_lambda(lambda)?;
    let residual = gram(w).minus_identity()?;
    let value = lambda * frob_norm_sq(&residual);
    let grad = w.matmul(&residual)?.scale(4.0 * lambda);
    Ok(RegOutput { value, grad })
}

/// `λ‖WWᵀ − I‖²_F` with gradient `4λ(WWᵀ − I)W`.
pub fn so_rows(w: &Matrix, lambda: f64) -> Result<RegOutput, RegError> {
    Ok(so(&w.transpose(), lambda)?.transposed())
}

pub fn dso(w: &Matrix, lambda: f64) -> Result<RegOutput, RegError> {
    let cols = so(w, lambda)?;
    let rows = so_rows(w, lambda)?;
    Ok(RegOutput {
        value: cols.value + rows.value,
        grad: cols.grad.add(&rows.grad)?,
    })
}

pub fn selective_so(w: &Matrix, lambda: f64) -> Result<RegOutput, RegError> {
    if w.rows() > w.cols() {
        so(w, lambda)
    } else {
        so_rows(w, lambda)
    }
}

/// Upper-triangle entries of `WᵀW − I` ranked by magnitude.
///
/// Returns `(i, j, entry)` of the winner and the runner-up magnitude (if any).
/// Ties go to the first entry in row-major order.
fn mc_candidates(w: &Matrix, off_diagonal_only: bool) -> Option<((usize, usize, f64), Option<f64>)> {
    let n = w.cols();
    let g = gram(w);
    let mut best: Option<(usize, usize, f64)> = None;
    let mut runner_up: Option<f64> = None;
    for i in 0..n {
        let start = if off_diagonal_only { i + 1 } else { i };
        for j in start..n {
            let d = g.get(i, j) - if i == j { 1.0 } else { 0.0 };
            match best {
                Some((_, _, b)) if d.abs() <= b.abs() => {
                    runner_up = Some(runner_up.map_or(d.abs(), |r: f64| r.max(d.abs())));
                }
                _ => {
                    if let Some((_, _, b)) = best {
                        runner_up = Some(runner_up.map_or(b.abs(), |r: f64| r.max(b.abs())));
                    }
                    best = Some((i, j, d));
                }
            }
        }
    }
    best.map(|b| (b, runner_up))
}

pub fn mc(w: &Matrix, lambda: f64) -> Result<RegOutput, RegError> {
    mc_with(w, lambda, false)
}

pub fn mc_with(w: &Matrix, lambda: f64, off_diagonal_only: bool) -> Result<RegOutput, RegError> {
    check_lambda(lambda)?;
    let (m, n) = w.shape();
    let Some(((i, j, entry), _)) = mc_candidates(w, off_diagonal_only) else {
        return Ok(RegOutput::zero(m, n));
    };
    let sign = if entry > 0.0 {
        1.0
    } else if entry < 0.0 {
        -1.0
    } else {
        0.0
    };
    let mut grad = Matrix::zeros(m, n);
    let coef = lambda * sign;
    // ∂G_ij/∂W puts w_i into column j and w_j into column i.
    for r in 0..m {
        grad.set(r, j, grad.get(r, j) + coef * w.get(r, i));
        grad.set(r, i, grad.get(r, i) + coef * w.get(r, j));
    }
    Ok(RegOutput {
        value: lambda * entry.abs(),
        grad,
    })
}

pub fn srip(w: &Matrix, lambda: f64, mode: SripMode, iters: usize, seed: u64) -> Result<RegOutput, RegError> {
    match mode {
        SripMode::Exact => srip_exact(w, lambda),
        SripMode::Power => {
            let start = random_unit_vector(w.cols(), seed);
            Ok(srip_power(w, lambda, iters, &start)?.0)
        }
    }
}

/// Rounding level of `WᵀW − I` applied to a unit vector.
fn gram_noise_floor(w: &Matrix) -> f64 {
    w.cols() as f64 * f64::EPSILON * (frob_norm_sq(w) + 1.0)
}

pub fn srip_exact(w: &Matrix, lambda: f64) -> Result<RegOutput, RegError> {
    check_lambda(lambda)?;
    let eig = sym_eigen(&gram(w).minus_identity()?)?;
    let k = eig.dominant_index();
    let mu = eig.values[k];
    let v = eig.vector(k);
    if mu.abs() <= gram_noise_floor(w) {
        // WᵀW = I up to rounding: the minimum, where 0 is a subgradient.
        return Ok(RegOutput::zero(w.rows(), w.cols()));
    }
    let sign = if mu < 0.0 { -1.0 } else { 1.0 };
    let wv = w.matvec(&v);
    Ok(RegOutput {
        value: lambda * mu.abs(),
        grad: outer(&wv, &v).scale(2.0 * lambda * sign),
    })
}

/// SRIP with the spectral norm estimated by power iteration from `start`.
///
/// `WᵀW − I` is applied as `x ↦ Wᵀ(Wx) − x`, never formed. The returned
/// [`PowerEstimate`] can seed the next call for a warm start. A vanishing
/// iterate yields a zero penalty.
pub fn srip_power(
    w: &Matrix,
    lambda: f64,
    iters: usize,
    start: &[f64],
) -> Result<(RegOutput, PowerEstimate), RegError> {
    check_lambda(lambda)?;
    let apply = |x: &[f64]| -> Vec<f64> {
        let wx = w.matvec(x);
        let mut out = w.matvec_t(&wx);
        for (o, xi) in out.iter_mut().zip(x) {
            *o -= xi;
        }
        out
    };
    let est = match power_iter_with(apply, iters, start, gram_noise_floor(w)) {
        Ok(est) => est,
        Err(LinalgError::ZeroIterate) => {
            let (m, n) = w.shape();
            let est = PowerEstimate {
                sigma: 0.0,
                direction: start.to_vec(),
            };
            return Ok((RegOutput::zero(m, n), est));
        }
        Err(e) => return Err(e.into()),
    };
    let d = &est.direction;
    let wd = w.matvec(d);
    // Rayleigh quotient dᵀ(WᵀW − I)d for unit d.
    let rayleigh = norm2(&wd).powi(2) - 1.0;
    let sign = if rayleigh < 0.0 { -1.0 } else { 1.0 };
    let out = RegOutput {
        value: lambda * est.sigma,
        grad: outer(&wd, d).scale(2.0 * lambda * sign),
    };
    Ok((out, est))
}

pub fn sr(w: &Matrix, lambda_s: f64) -> Result<RegOutput, RegError> {
    check_lambda(lambda_s)?;
    let eig = sym_eigen(&gram(w))?;
    let top = eig.values[0].max(0.0);
    let v = eig.vector(0);
    let wv = w.matvec(&v);
    Ok(RegOutput {
        value: 0.5 * lambda_s * top,
        grad: outer(&wv, &v).scale(lambda_s),
    })
}

pub fn evaluate(kind: RegKind, w: &Matrix, lambda: f64, opts: &RegOptions) -> Result<RegOutput, RegError> {
    match kind {
        RegKind::None => {
            check_lambda(lambda)?;
            Ok(RegOutput::zero(w.rows(), w.cols()))
        }
        RegKind::So => so(w, lambda),
        RegKind::Dso => dso(w, lambda),
        RegKind::SelectiveSo => selective_so(w, lambda),
        RegKind::Mc => mc_with(w, lambda, opts.mc_off_diagonal_only),
        RegKind::Srip => srip(w, lambda, opts.srip_mode, opts.power_iters, opts.seed),
        RegKind::Sr => sr(w, lambda),
    }
}

/// Distance from the nearest non-differentiable point for the kinds that
/// select a maximum.
///
/// `Mc`: gap between the two largest candidate magnitudes. `Srip`: gap
/// between the two largest eigenvalue magnitudes of `WᵀW − I`. `Sr`: gap
/// between the two largest eigenvalues of `WᵀW`. Smooth kinds return `None`.
pub fn kink_gap(kind: RegKind, w: &Matrix, opts: &RegOptions) -> Result<Option<f64>, RegError> {
    match kind {
        RegKind::Mc => Ok(mc_candidates(w, opts.mc_off_diagonal_only)
            .map(|((_, _, best), second)| second.map_or(f64::INFINITY, |s| best.abs() - s))),
        RegKind::Srip => {
            let eig = sym_eigen(&gram(w).minus_identity()?)?;
            let mut mags: Vec<f64> = eig.values.iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| b.total_cmp(a));
            Ok(Some(mags.get(1).map_or(f64::INFINITY, |s| mags[0] - s)))
        }
        RegKind::Sr => {
            let eig = sym_eigen(&gram(w))?;
            Ok(Some(eig.values.get(1).map_or(f64::INFINITY, |s| eig.values[0] - s)))
        }
        _ => Ok(None),
    }
}
