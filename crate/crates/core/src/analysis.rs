//! Orthogonality diagnostics for a weight matrix: mutual coherence,
//! restricted-isometry constants by exhaustive column-subset enumeration,
//! the singular spectrum and column-norm statistics.

use std::collections::BTreeMap;
use std::fmt::Write;

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{gram, norm2, singular_values, sym_spectral_norm, LinalgError, Matrix};

/// Maximum number of column subsets a single RIP evaluation may visit.
pub const RIP_SUBSET_BUDGET: u64 = 1_000_000;

/// Columns with a norm at or below this count as zero.
const ZERO_COLUMN: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("mutual coherence needs at least two columns, got {0}")]
    TooFewColumns(usize),
    #[error("column {0} has zero norm")]
    ZeroColumn(usize),
    #[error("sparsity level k = {k} outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error(
        "RIP enumeration for k = {k} needs {required} subsets (budget {budget}); \
         exact up to k = {k_completed}, lower bound {lower_bound}"
    )]
    BudgetExceeded {
        k: usize,
        required: u64,
        budget: u64,
        /// Largest sparsity level whose enumeration finished.
        k_completed: usize,
        /// δ(k_completed); a lower bound on δ(k).
        lower_bound: f64,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// μ_W = max over i ≠ j of |⟨wᵢ, wⱼ⟩| / (‖wᵢ‖‖wⱼ‖).
pub fn mutual_coherence(w: &Matrix) -> Result<f64, AnalysisError> {
    let n = w.cols();
    if n < 2 {
        return Err(AnalysisError::TooFewColumns(n));
    }
    let g = gram(w);
    if let Some(i) = (0..n).position(|i| g.get(i, i).sqrt() <= ZERO_COLUMN) {
        return Err(AnalysisError::ZeroColumn(i));
    }
    let mut mu = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            // One square root of the product keeps duplicated columns at exactly 1.
            mu = mu.max(g.get(i, j).abs() / (g.get(i, i) * g.get(j, j)).sqrt());
        }
    }
    Ok(mu.min(1.0))
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).unwrap_or(u64::MAX)
}

/// σ(W_Sᵀ W_S − I) maximized over all column subsets with exactly `size`
/// columns.
fn max_over_subsets(w: &Matrix, size: usize) -> Result<f64, AnalysisError> {
    let subsets: Vec<Vec<usize>> = (0..w.cols()).combinations(size).collect();
    let sigmas = subsets
        .par_iter()
        .map(|s| sym_spectral_norm(&gram(&w.select_columns(s)).minus_identity()?))
        .collect::<Result<Vec<f64>, LinalgError>>()?;
    Ok(sigmas.into_iter().fold(0.0, f64::max))
}

/// δ_W(k): the worst deviation from isometry over every set of at most `k`
/// columns.
pub fn rip_constant(w: &Matrix, k: usize) -> Result<f64, AnalysisError> {
    rip_constant_with_budget(w, k, RIP_SUBSET_BUDGET)
}

pub fn rip_constant_with_budget(w: &Matrix, k: usize, budget: u64) -> Result<f64, AnalysisError> {
    let n = w.cols();
    if k == 0 || k > n {
        return Err(AnalysisError::InvalidK { k, n });
    }
    let required = (1..=k).fold(0u64, |acc, c| acc.saturating_add(binomial(n, c)));
    let mut visited = 0u64;
    let mut delta = 0.0f64;
    for size in 1..=k {
        visited = visited.saturating_add(binomial(n, size));
        if visited > budget {
            return Err(AnalysisError::BudgetExceeded {
                k,
                required,
                budget,
                k_completed: size - 1,
                lower_bound: delta,
            });
        }
        delta = delta.max(max_over_subsets(w, size)?);
    }
    Ok(delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialRip {
    pub k: usize,
    pub k_completed: usize,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthoReport {
    pub rows: usize,
    pub cols: usize,
    /// 0 for a single-column matrix.
    pub mutual_coherence: f64,
    /// σ(WᵀW − I) from the exact eigensolver.
    pub srip_sigma: f64,
    pub singular_values: Vec<f64>,
    pub col_norm_min: f64,
    pub col_norm_max: f64,
    pub col_norm_mean: f64,
    pub rip_constants: BTreeMap<usize, f64>,
    /// Requested sparsity levels whose enumeration exceeded the budget.
    pub rip_partial: Vec<PartialRip>,
}

impl OrthoReport {
    pub fn is_partial(&self) -> bool {
        !self.rip_partial.is_empty()
    }

    fn metrics(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("rows".to_string(), self.rows.to_string()),
            ("cols".to_string(), self.cols.to_string()),
            ("mutual_coherence".to_string(), self.mutual_coherence.to_string()),
            ("srip_sigma".to_string(), self.srip_sigma.to_string()),
            ("col_norm_min".to_string(), self.col_norm_min.to_string()),
            ("col_norm_max".to_string(), self.col_norm_max.to_string()),
            ("col_norm_mean".to_string(), self.col_norm_mean.to_string()),
        ];
        for (i, s) in self.singular_values.iter().enumerate() {
            out.push((format!("singular_value_{}", i + 1), s.to_string()));
        }
        for (k, d) in &self.rip_constants {
            out.push((format!("rip_delta_k{k}"), d.to_string()));
        }
        for p in &self.rip_partial {
            out.push((
                format!("rip_delta_k{}_partial_lower_bound", p.k),
                p.lower_bound.to_string(),
            ));
            out.push((
                format!("rip_delta_k{}_partial_exact_up_to_k", p.k),
                p.k_completed.to_string(),
            ));
        }
        out.push(("partial".to_string(), self.is_partial().to_string()));
        out
    }

    /// `metric,value` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in self.metrics() {
            writeln!(s, "{k},{v}").unwrap();
        }
        s
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.metrics() {
            writeln!(s, "{k}: {v}").unwrap();
        }
        s
    }
}

pub fn report(w: &Matrix, ks: &[usize]) -> Result<OrthoReport, AnalysisError> {
    report_with_budget(w, ks, RIP_SUBSET_BUDGET)
}

pub fn report_with_budget(w: &Matrix, ks: &[usize], budget: u64) -> Result<OrthoReport, AnalysisError> {
    let n = w.cols();
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
        return Err(AnalysisError::InvalidK { k, n });
    }
    let mutual_coherence = if n >= 2 { mutual_coherence(w)? } else { 0.0 };
    let srip_sigma = sym_spectral_norm(&gram(w).minus_identity()?)?;
    let singular_values = singular_values(w)?;
    let norms: Vec<f64> = (0..n).map(|j| norm2(&w.col(j))).collect();

    let mut rip_constants = BTreeMap::new();
    let mut rip_partial = Vec::new();
    let mut sorted: Vec<usize> = ks.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for k in sorted {
        match rip_constant_with_budget(w, k, budget) {
            Ok(d) => {
                rip_constants.insert(k, d);
            }
            Err(AnalysisError::BudgetExceeded {
                k,
                k_completed,
                lower_bound,
                ..
            }) => rip_partial.push(PartialRip {
                k,
                k_completed,
                lower_bound,
            }),
            Err(e) => return Err(e),
        }
    }

    Ok(OrthoReport {
        rows: w.rows(),
        cols: n,
        mutual_coherence,
        srip_sigma,
        singular_values,
        col_norm_min: norms.iter().copied().fold(f64::INFINITY, f64::min),
        col_norm_max: norms.iter().copied().fold(0.0, f64::max),
        col_norm_mean: norms.iter().sum::<f64>() / n as f64,
        rip_constants,
        rip_partial,
    })
}
