use orthoreg::linalg::{power_iter_sigma, random_unit_vector, sym_eig_dominant, Matrix};
use orthoreg::trainer::init_orthogonal;
use proptest::prelude::*;

fn from_spectrum(q: &Matrix, values: &[f64]) -> Matrix {
    let n = values.len();
    Matrix::from_fn(n, n, |i, j| {
        if i <= j {
            (0..n).map(|k| q.get(i, k) * values[k] * q.get(j, k)).sum()
        } else {
            (0..n).map(|k| q.get(j, k) * values[k] * q.get(i, k)).sum()
        }
    })
}

/// After k rounds the estimate is ‖A^{2k} v‖ / ‖A^{2k−1} v‖. With
/// A = Q diag(λ) Qᵀ and c = Qᵀv that is sqrt(Σ c²λ^{4k} / Σ c²λ^{4k−2}).
fn closed_form(q: &Matrix, values: &[f64], start: &[f64], rounds: i32) -> f64 {
    let n = values.len();
    let c: Vec<f64> = (0..n).map(|k| (0..n).map(|i| q.get(i, k) * start[i]).sum()).collect();
    let num: f64 = (0..n).map(|k| c[k] * c[k] * values[k].powi(4 * rounds)).sum();
    let den: f64 = (0..n).map(|k| c[k] * c[k] * values[k].powi(4 * rounds - 2)).sum();
    (num / den).sqrt()
}

#[test]
fn estimate_matches_closed_form() {
    for seed in 0..50u64 {
        let n = 3 + (seed % 6) as usize;
        let values: Vec<f64> = (0..n)
            .map(|k| (k as f64 + 1.0) * if k % 2 == 0 { 0.3 } else { -0.25 })
            .collect();
        let q = init_orthogonal(n, n, seed);
        let a = from_spectrum(&q, &values);
        let start = random_unit_vector(n, 100 + seed);
        for rounds in 1..=4 {
            let est = power_iter_sigma(&a, rounds as usize, 100 + seed).unwrap();
            let want = closed_form(&q, &values, &start, rounds);
            assert!(
                (est - want).abs() < 1e-12 * want,
                "seed {seed} rounds {rounds}: {est} vs {want}"
            );
        }
    }
}

#[test]
fn unlucky_start_is_slow_even_with_a_gap() {
    // Gap ratio 2, start nearly orthogonal to the dominant direction: two
    // rounds stay far from σ = 2 while ten rounds converge.
    let q = Matrix::identity(2);
    let values = [2.0, 1.0];
    let a = from_spectrum(&q, &values);
    let start = [0.05, (1.0f64 - 0.0025).sqrt()];
    let two = closed_form(&q, &values, &start, 2);
    assert!(two < 1.8, "{two}");
    let ten = closed_form(&q, &values, &start, 10);
    assert!((ten - 2.0).abs() < 1e-3 * 2.0);
    let est = orthoreg::linalg::power_iter(&a, 2, &start).unwrap().sigma;
    assert!((est - two).abs() < 1e-12);
}

fn symmetric(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-2.0f64..2.0, n * n).prop_map(move |d| {
            let a = Matrix::new(n, n, d).unwrap();
            Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)))
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn estimate_is_a_lower_bound(a in symmetric(7), iters in 1usize..12, seed in 0u64..10_000) {
        let exact = sym_eig_dominant(&a).unwrap().value.abs();
        match power_iter_sigma(&a, iters, seed) {
            Ok(est) => prop_assert!(est <= exact + 1e-12, "{} > {}", est, exact),
            Err(_) => prop_assert!(exact < 1e-12 || a.max_abs() == 0.0),
        }
    }

    #[test]
    fn estimate_is_non_decreasing_in_iters(a in symmetric(7), seed in 0u64..10_000) {
        if let Ok(first) = power_iter_sigma(&a, 1, seed) {
            let mut prev = first;
            for iters in 2..8 {
                let est = power_iter_sigma(&a, iters, seed).unwrap();
                prop_assert!(est >= prev * (1.0 - 1e-12), "{} then {}", prev, est);
                prev = est;
            }
        }
    }
}
