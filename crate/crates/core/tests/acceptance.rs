//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Built with `harness = false` so the lines
//! are always shown.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use orthoreg::analysis::{mutual_coherence, rip_constant};
use orthoreg::config::ExperimentConfig;
use orthoreg::gradcheck::{check_seed, random_weight, DEFAULT_STEP};
use orthoreg::linalg::{power_iter_sigma, sym_eigen, Matrix};
use orthoreg::regularizers::{dso, mc, so, srip, srip_exact, RegKind, RegOptions, SripMode};
use orthoreg::rng;
use orthoreg::trainer::{init_orthogonal, train};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_orthoreg"))
}

// 1. analytic gradients against central differences
fn gradient_correctness() -> Verdict {
    let started = Instant::now();
    let kinds = [
        RegKind::So,
        RegKind::Dso,
        RegKind::SelectiveSo,
        RegKind::Mc,
        RegKind::Srip,
        RegKind::Sr,
    ];
    let opts = RegOptions::exact();
    let mut notes = Vec::new();
    let mut pass = true;
    for kind in kinds {
        let (mut worst, mut skipped, mut failed, mut trials) = (0.0f64, 0usize, 0usize, 0usize);
        for shape in [(8, 5), (5, 8)] {
            for seed in 0..100 {
                let o = check_seed(kind, shape, seed, 1.0, DEFAULT_STEP, &opts).unwrap();
                trials += 1;
                skipped += usize::from(o.skipped);
                failed += usize::from(!o.passed(1e-4));
                worst = worst.max(o.max_rel_error);
            }
        }
        let ok = failed == 0 && (skipped as f64) < 0.05 * trials as f64;
        pass &= ok;
        notes.push(format!(
            "{kind} worst={worst:.1e} skipped={skipped}/{trials} failed={failed}"
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 30.0;
    verdict(pass, format!("{}; {secs:.2}s (limit 30s)", notes.join(", ")))
}

// 2. SO gradient equals 4λW(WᵀW − I)
fn so_gradient_identity() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let (r, c) = (2 + (seed % 9) as usize, 2 + (seed / 9 % 9) as usize);
        let w = random_weight(r, c, 1000 + seed);
        let lambda = 0.05 + 0.01 * seed as f64;
        let g = so(&w, lambda).unwrap().grad;
        // 4λ W (WᵀW − I) by explicit sums
        for i in 0..r {
            for j in 0..c {
                let mut s = 0.0;
                for k in 0..c {
                    let mut gram = 0.0;
                    for row in 0..r {
                        gram += w.get(row, k) * w.get(row, j);
                    }
                    if k == j {
                        gram -= 1.0;
                    }
                    s += w.get(i, k) * gram;
                }
                worst = worst.max((g.get(i, j) - 4.0 * lambda * s).abs());
            }
        }
    }
    verdict(
        worst <= 1e-12,
        format!("max |Δ| = {worst:.1e} over 100 matrices (tol 1e-12)"),
    )
}

// 3. SRIP value is the RIP constant at k = n
fn srip_equals_full_rip() -> Verdict {
    let mut r = rng::seeded(31);
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let rows = r.random_range(1..=10);
        let cols = r.random_range(1..=10);
        let w = random_weight(rows, cols, 2000 + seed);
        let s = srip_exact(&w, 1.0).unwrap().value;
        let d = rip_constant(&w, cols).unwrap();
        worst = worst.max((s - d).abs());
    }
    verdict(
        worst <= 1e-12,
        format!("max |srip - delta_n| = {worst:.1e} over 50 matrices (tol 1e-12)"),
    )
}

/// Symmetric `Q diag(λ) Qᵀ` whose dominant |eigenvalue| is at least twice
/// every other one.
fn gapped_symmetric(seed: u64) -> (Matrix, f64) {
    let n = 3 + (seed % 8) as usize;
    let mut r = rng::stream(seed, 40);
    let mut values: Vec<f64> = (0..n - 1).map(|_| r.random_range(-1.0..1.0)).collect();
    let top = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ratio = 2.0 + r.random_range(0.0..2.0);
    let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
    values.push(sign * ratio * top);
    let q = init_orthogonal(n, n, seed);
    let a = Matrix::from_fn(n, n, |i, j| (0..n).map(|k| q.get(i, k) * values[k] * q.get(j, k)).sum());
    let a = Matrix::from_fn(n, n, |i, j| 0.5 * (a.get(i, j) + a.get(j, i)));
    let exact = sym_eigen(&a).unwrap().values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (a, exact)
}

// 4. power-iteration estimate: lower bound, 2- and 10-round accuracy
fn power_iteration_fidelity() -> Verdict {
    let started = Instant::now();
    let (mut above, mut miss2, mut miss10) = (0usize, 0usize, 0usize);
    let (mut worst2, mut worst10) = (0.0f64, 0.0f64);
    for seed in 0..100u64 {
        let (a, exact) = gapped_symmetric(seed);
        for iters in 1..=10 {
            let est = power_iter_sigma(&a, iters, 500 + seed).unwrap();
            if est > exact * (1.0 + 1e-12) {
                above += 1;
            }
            let rel = (exact - est).abs() / exact;
            if iters == 2 {
                worst2 = worst2.max(rel);
                miss2 += usize::from(rel > 0.10);
            }
            if iters == 10 {
                worst10 = worst10.max(rel);
                miss10 += usize::from(rel > 1e-3);
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = above == 0 && miss2 == 0 && miss10 == 0 && secs < 10.0;
    verdict(
        pass,
        format!(
            "above exact: {above}; iters=2 outside 10%: {miss2}/100 (worst {:.1}%); \
             iters=10 outside 0.1%: {miss10}/100 (worst {:.2e}); {secs:.2}s (limit 10s)",
            100.0 * worst2,
            worst10
        ),
    )
}

// 5. penalties vanish on orthonormal weights
fn orthogonality_zero_point() -> Verdict {
    let mut worst = 0.0f64;
    for (seed, (m, n)) in [(6, 4), (8, 5), (10, 10), (7, 2), (16, 16), (32, 16)]
        .into_iter()
        .enumerate()
    {
        let w = init_orthogonal(m, n, seed as u64);
        let values = [
            so(&w, 1.0).unwrap().value,
            mc(&w, 1.0).unwrap().value,
            srip(&w, 1.0, SripMode::Exact, 2, 0).unwrap().value,
            srip(&w, 1.0, SripMode::Power, 2, seed as u64).unwrap().value,
            mutual_coherence(&w).unwrap(),
        ];
        worst = values.into_iter().fold(worst, f64::max);
        if m == n {
            worst = worst.max(dso(&w, 1.0).unwrap().value);
        }
    }
    verdict(
        worst <= 1e-10,
        format!("largest SO/MC/SRIP/coherence/DSO value = {worst:.1e} (tol 1e-10)"),
    )
}

fn expected_lambda(epoch: usize) -> f64 {
    match epoch {
        0..=19 => 0.1,
        20..=49 => 1e-3,
        50..=69 => 1e-4,
        70..=119 => 1e-6,
        _ => 0.0,
    }
}

fn expected_weight_decay(kind: RegKind, epoch: usize) -> f64 {
    match (kind, epoch >= 20) {
        (RegKind::So, true) => 1e-4,
        (RegKind::Dso, true) => 5e-4,
        _ => 1e-8,
    }
}

// 6. schedule-dump reproduces the coefficient plan exactly
fn scheduler_exactness() -> Verdict {
    let mut mismatches = 0usize;
    for kind in RegKind::ALL {
        let out = bin()
            .args(["schedule-dump", "--epochs", "200", "--reg", kind.name()])
            .output()
            .unwrap();
        if !out.status.success() {
            return verdict(
                false,
                format!("schedule-dump --reg {kind} exited {:?}", out.status.code()),
            );
        }
        let text = String::from_utf8(out.stdout).unwrap();
        let mut lines = text.lines();
        if lines.next() != Some("epoch,lambda,weight_decay") {
            mismatches += 1;
        }
        let rows: Vec<&str> = lines.collect();
        if rows.len() != 200 {
            mismatches += 1;
        }
        for (e, row) in rows.iter().enumerate() {
            let f: Vec<&str> = row.split(',').collect();
            let ok = f.len() == 3
                && f[0].parse::<usize>() == Ok(e)
                && f[1].parse::<f64>() == Ok(expected_lambda(e))
                && f[2].parse::<f64>() == Ok(expected_weight_decay(kind, e));
            mismatches += usize::from(!ok);
        }
    }
    verdict(
        mismatches == 0,
        format!(
            "{mismatches} mismatching rows over 200 epochs x {} kinds",
            RegKind::ALL.len()
        ),
    )
}

// 7. paired NONE vs SRIP runs on Gaussian blobs
fn convergence_effect() -> Verdict {
    let started = Instant::now();
    let load = |name: &str| {
        ExperimentConfig::load(&repo_root().join("configs").join(name))
            .unwrap()
            .0
    };
    let (base_cfg, srip_cfg) = (load("blobs_none.toml"), load("blobs_srip.toml"));
    let (tr, va) = base_cfg.datasets().unwrap();
    let (mut acc_wins, mut sigma_wins, mut base_acc_sum) = (0usize, 0usize, 0.0);
    let mut pairs = Vec::new();
    for seed in 0..5 {
        let mut a = base_cfg.train_config().unwrap();
        let mut b = srip_cfg.train_config().unwrap();
        a.seed = seed;
        b.seed = seed;
        assert_eq!(a.reg_kind, RegKind::None);
        assert_eq!(b.reg_kind, RegKind::Srip);
        let base = train(&a, &tr, &va).unwrap().record;
        let reg = train(&b, &tr, &va).unwrap().record;
        let (ba, ra) = (base.last().unwrap().val_accuracy, reg.last().unwrap().val_accuracy);
        let (bs, rs) = (base.epochs[20].mean_sigma(), reg.epochs[20].mean_sigma());
        acc_wins += usize::from(ra >= ba);
        sigma_wins += usize::from(rs <= 0.5 * bs);
        base_acc_sum += ba;
        pairs.push(format!("{ba:.3}/{ra:.3} sigma20 {bs:.2}/{rs:.2}"));
    }
    let base_mean = base_acc_sum / 5.0;
    let secs = started.elapsed().as_secs_f64();
    let pass = acc_wins >= 4 && sigma_wins == 5 && (0.85..=0.95).contains(&base_mean) && secs < 300.0;
    verdict(
        pass,
        format!(
            "acc >= baseline {acc_wins}/5, sigma20 <= 0.5x {sigma_wins}/5, baseline mean acc {base_mean:.3}; \
             none/srip [{}]; {secs:.1}s (limit 300s)",
            pairs.join("; ")
        ),
    )
}

// 8. RIP constants: monotone in k, and bound every sampled sparse ratio
fn rip_monotone_and_sampled() -> Verdict {
    let mut r = rng::seeded(88);
    let (mut non_monotone, mut violations) = (0usize, 0usize);
    let mut closest = f64::INFINITY;
    for m in 0..20u64 {
        let w = random_weight(8, 6, 3000 + m);
        let deltas: Vec<f64> = (1..=6).map(|k| rip_constant(&w, k).unwrap()).collect();
        non_monotone += deltas.windows(2).filter(|p| p[1] < p[0]).count();
        for k in 1..=6 {
            let mut sampled = 0.0f64;
            for _ in 0..100_000 {
                let support = sample(&mut r, 6, k);
                let mut z = [0.0f64; 6];
                for j in support.iter() {
                    z[j] = StandardNormal.sample(&mut r);
                }
                let zz: f64 = z.iter().map(|v| v * v).sum();
                let mut wz2 = 0.0;
                for i in 0..8 {
                    let row: f64 = (0..6).map(|j| w.get(i, j) * z[j]).sum();
                    wz2 += row * row;
                }
                sampled = sampled.max((wz2 / zz - 1.0).abs());
            }
            if sampled > deltas[k - 1] + 1e-12 {
                violations += 1;
            }
            closest = closest.min(deltas[k - 1] - sampled);
        }
    }
    verdict(
        non_monotone == 0 && violations == 0,
        format!(
            "non-monotone steps {non_monotone}, sampled > enumerated {violations} of 120; \
             smallest margin {closest:.1e}"
        ),
    )
}

// 9. byte-identical outputs from repeated runs
fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_root().join("configs/blobs_srip.toml");
    let mut records = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let st = bin().arg("train").arg(&cfg).arg("--out").arg(&out).status().unwrap();
        if !st.success() {
            return verdict(false, format!("train exited {:?}", st.code()));
        }
        records.push(std::fs::read(out.join("record.csv")).unwrap());
    }
    let matf = dir.path().join("a/layer_0.matf");
    let mut reports = Vec::new();
    for format in ["text", "csv", "text", "csv"] {
        let out = bin()
            .arg("analyze")
            .arg(&matf)
            .args(["--ks", "1,2,3", "--format", format])
            .output()
            .unwrap();
        if !out.status.success() {
            return verdict(false, format!("analyze exited {:?}", out.status.code()));
        }
        reports.push(out.stdout);
    }
    let same_record = records[0] == records[1];
    let same_reports = reports[0] == reports[2] && reports[1] == reports[3];
    verdict(
        same_record && same_reports,
        format!(
            "record.csv identical: {same_record} ({} bytes); analyze reports identical: {same_reports}",
            records[0].len()
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        ("gradient correctness", gradient_correctness),
        ("SO explicit gradient", so_gradient_identity),
        ("SRIP equals full-k RIP", srip_equals_full_rip),
        ("power-iteration fidelity", power_iteration_fidelity),
        ("orthogonality zero-point", orthogonality_zero_point),
        ("scheduler exactness", scheduler_exactness),
        ("desk-scale convergence", convergence_effect),
        ("RIP monotonicity and sampling", rip_monotone_and_sampled),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {} {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
