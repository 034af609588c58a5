use orthoreg::analysis::{mutual_coherence, report, rip_constant};
use orthoreg::gradcheck::random_weight;
use orthoreg::linalg::Matrix;
use proptest::prelude::*;

fn col(w: &Matrix, j: usize) -> Vec<f64> {
    (0..w.rows()).map(|i| w.get(i, j)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// δ(2) from closed-form 2×2 eigenvalues over every column pair.
fn rip2_oracle(w: &Matrix) -> f64 {
    let n = w.cols();
    let mut delta = (0..n)
        .map(|j| (dot(&col(w, j), &col(w, j)) - 1.0).abs())
        .fold(0.0, f64::max);
    for i in 0..n {
        for j in i + 1..n {
            let (a, d) = (dot(&col(w, i), &col(w, i)) - 1.0, dot(&col(w, j), &col(w, j)) - 1.0);
            let b = dot(&col(w, i), &col(w, j));
            let mid = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            delta = delta.max((mid + rad).abs()).max((mid - rad).abs());
        }
    }
    delta
}

fn coherence_oracle(w: &Matrix) -> f64 {
    let n = w.cols();
    let mut mu = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (col(w, i), col(w, j));
            mu = mu.max(dot(&a, &b).abs() / (dot(&a, &a).sqrt() * dot(&b, &b).sqrt()));
        }
    }
    mu
}

#[test]
fn rip_two_matches_pairwise_closed_form() {
    for seed in 0..30 {
        let w = random_weight(6, 5, seed);
        assert!((rip_constant(&w, 2).unwrap() - rip2_oracle(&w)).abs() < 1e-12);
    }
}

#[test]
fn coherence_matches_normalized_dot_products() {
    for seed in 0..30 {
        let w = random_weight(5, 7, seed);
        assert!((mutual_coherence(&w).unwrap() - coherence_oracle(&w)).abs() < 1e-14);
    }
}

#[test]
fn report_text_and_csv_carry_the_same_metrics() {
    let w = random_weight(7, 5, 4);
    let r = report(&w, &[1, 3, 5]).unwrap();
    let text = r.to_text();
    let csv = r.to_csv();
    assert_eq!(text.lines().count() + 1, csv.lines().count());
    for (t, c) in text.lines().zip(csv.lines().skip(1)) {
        assert_eq!(t.replacen(": ", ",", 1), c);
    }
    assert_eq!(r.rip_constants[&5], r.srip_sigma);
    assert!(r.singular_values.windows(2).all(|p| p[0] >= p[1]));
}

fn matrix(max: usize) -> impl Strategy<Value = Matrix> {
    (2..=max, 2..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(0.1f64..2.0, r * c).prop_flat_map(move |mags| {
            prop::collection::vec(any::<bool>(), r * c).prop_map(move |signs| {
                let d = mags
                    .iter()
                    .zip(&signs)
                    .map(|(m, s)| if *s { *m } else { -*m })
                    .collect();
                Matrix::new(r, c, d).unwrap()
            })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rip_is_monotone_in_k(w in matrix(6)) {
        let deltas: Vec<f64> = (1..=w.cols()).map(|k| rip_constant(&w, k).unwrap()).collect();
        for p in deltas.windows(2) {
            prop_assert!(p[1] >= p[0]);
        }
    }

    #[test]
    fn coherence_ignores_column_scaling(w in matrix(6), s in 0.1f64..10.0) {
        let scaled = Matrix::from_fn(w.rows(), w.cols(), |i, j| w.get(i, j) * s * (1.0 + j as f64));
        let a = mutual_coherence(&w).unwrap();
        let b = mutual_coherence(&scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn rip_ignores_column_order(w in matrix(6), k in 1usize..6) {
        let k = k.min(w.cols());
        let rev = Matrix::from_fn(w.rows(), w.cols(), |i, j| w.get(i, w.cols() - 1 - j));
        prop_assert!((rip_constant(&w, k).unwrap() - rip_constant(&rev, k).unwrap()).abs() < 1e-12);
    }
}
