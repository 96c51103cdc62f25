//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any of them fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use nnssgd::bench::{bench_iterations, BenchConfig};
use nnssgd::completion::{train, CompletionConfig, NullSink};
use nnssgd::data::{gen_synthetic, DuplicatePolicy, SparseObservations};
use nnssgd::linalg::{reduced_qr, truncate_svd, CompactSvd, DenseMatrix};
use nnssgd::loss::ObservedLoss;
use nnssgd::probing::{sample_probe, ProbeKind, ProbeScaling, RngState};
use nnssgd::prox::{prox_objective, prox_reference_solver, prox_reference_solver_masked};
use nnssgd::ssgd::{basic_ssgd, incremental_update, theorem_step_size, SsgdConfig, StepSize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const KINDS: [ProbeKind; 3] = [ProbeKind::ColumnSampling, ProbeKind::Rademacher, ProbeKind::Gaussian];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(r: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(r))
}

fn na(a: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn random_compact(r: &mut ChaCha8Rng, m: usize, n: usize, p: usize) -> CompactSvd<f64> {
    if p == 0 {
        return CompactSvd::zero(m, n);
    }
    let (qa, _) = reduced_qr(&gaussian(r, m, p)).unwrap();
    let (qb, _) = reduced_qr(&gaussian(r, n, p)).unwrap();
    let mut sigma: Vec<f64> = (0..p).map(|_| r.random_range(0.5..3.0)).collect();
    sigma.sort_by(|x, y| y.total_cmp(x));
    CompactSvd::from_parts(qa, sigma, qb).unwrap()
}

/// Best rank-`t` approximation scaled into the Frobenius ball of radius
/// `delta`, formed as `P·A` with `P` the projector onto the leading
/// eigenvectors of `A·Aᵀ`.
fn dense_truncate_project(a: &DMatrix<f64>, t: usize, delta: f64) -> DMatrix<f64> {
    let eig = (a * a.transpose()).symmetric_eigen();
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let top = eig.eigenvalues.max().max(0.0);
    let kept: Vec<_> = order
        .iter()
        .take(t)
        .filter(|&&l| eig.eigenvalues[l] > 1e-12 * top && eig.eigenvalues[l] > 0.0)
        .map(|&l| eig.eigenvectors.column(l).into_owned())
        .collect();
    if kept.is_empty() {
        return DMatrix::zeros(a.nrows(), a.ncols());
    }
    let u = DMatrix::from_columns(&kept);
    let mut out = &u * (u.transpose() * a);
    let norm = out.norm();
    if norm > delta {
        out *= delta / norm;
    }
    out
}

fn full_observations(z: &DenseMatrix<f64>) -> SparseObservations<f64> {
    let trip = (0..z.rows()).flat_map(|i| (0..z.cols()).map(move |j| (i, j, z[(i, j)])));
    SparseObservations::from_triplets(z.rows(), z.cols(), trip, DuplicatePolicy::Reject).unwrap()
}

fn c1_isotropy() -> Verdict {
    let mut worst = 0.0f64;
    for (s, kind) in KINDS.into_iter().enumerate() {
        let mut state = RngState::new(100 + s as u64);
        let mut acc = DMatrix::zeros(6, 6);
        for _ in 0..100_000 {
            let y = na(&sample_probe::<f64>(kind, 6, 2, &mut state).unwrap().to_dense());
            acc += &y * y.transpose();
        }
        acc /= 100_000.0;
        worst = worst.max((acc - DMatrix::identity(6, 6)).abs().max());
    }
    verdict(worst <= 0.02, format!("max |E[YYᵀ] - I| over three probe kinds = {worst:.4} (limit 0.02)"))
}

fn c2_variance() -> Verdict {
    let mut r = rng(200);
    let a = na(&gaussian(&mut r, 6, 6));
    let mut state = RngState::new(201);
    let mut acc = 0.0;
    for _ in 0..100_000 {
        let y = na(&sample_probe::<f64>(ProbeKind::ColumnSampling, 6, 2, &mut state).unwrap().to_dense());
        acc += (&a * &y * y.transpose()).norm_squared();
    }
    let ratio = acc / 100_000.0 / a.norm_squared();
    let target = 3.0;
    let dev = (ratio - target).abs() / target;
    verdict(
        dev <= 0.02,
        format!("column sampling E‖AYYᵀ‖²/‖A‖² = {ratio:.4}, n/k = {target} (relative deviation {dev:.4}, limit 0.02)"),
    )
}

fn c3_update_oracle() -> Verdict {
    let mut r = rng(300);
    let mut worst = 0.0f64;
    let mut count = 0;
    while count < 300 {
        let p = r.random_range(0..=5);
        let k = r.random_range(1..=4);
        let m = r.random_range(p.max(k).max(1)..=20);
        let n = r.random_range(p.max(k).max(1)..=15);
        let x = random_compact(&mut r, m, n, p.min(m.min(n)));
        let s = gaussian(&mut r, m, k);
        let kind = KINDS[count % 3];
        let scaling = if r.random_bool(0.5) { ProbeScaling::Unbiased } else { ProbeScaling::SingleScale };
        let y = sample_probe::<f64>(kind, n, k, &mut RngState::new(r.random())).unwrap();
        let eta = r.random_range(0.01..2.0);
        let cap = r.random_range(1..=8);
        let delta = if r.random_bool(0.5) { 1e6 } else { r.random_range(0.3..4.0) };
        let got = na(&incremental_update(&x, &s, &y, eta, cap, delta, scaling).unwrap().densify());
        let full = na(&x.densify()) - na(&s) * na(&y.update_factor(scaling)).transpose() * eta;
        let want = dense_truncate_project(&full, cap, delta);
        worst = worst.max((&got - &want).norm() / want.norm().max(f64::MIN_POSITIVE));
        count += 1;
    }
    verdict(worst <= 1e-8, format!("{count} instances, worst relative Frobenius error {worst:.2e} (limit 1e-8)"))
}

fn c4_truncation() -> Verdict {
    let mut r = rng(400);
    let mut worst_identity = 0.0f64;
    let mut beaten = 0;
    for trial in 0..20 {
        let (m, n) = (r.random_range(5..20), r.random_range(5..15));
        let p = m.min(n).min(6);
        let x = random_compact(&mut r, m, n, p);
        let t = 1 + trial % p;
        let err = truncate_svd(&x, t).densify().sub(&x.densify()).frobenius_norm();
        let dropped = x.sigma()[t..].iter().map(|s| s * s).sum::<f64>().sqrt();
        worst_identity = worst_identity.max((err - dropped).abs());
        for _ in 0..50 {
            let competitor = gaussian(&mut r, m, t).matmul_transpose(&gaussian(&mut r, n, t)).scale(r.random_range(0.01..2.0));
            if competitor.sub(&x.densify()).frobenius_norm() < err {
                beaten += 1;
            }
        }
    }
    verdict(
        worst_identity <= 1e-10 && beaten == 0,
        format!("max |error - dropped| = {worst_identity:.1e}, competitors that beat truncation: {beaten} of 1000"),
    )
}

fn c5_solver_vs_prox() -> Verdict {
    let mut gaps = Vec::new();
    for seed in 0..5u64 {
        let mut r = rng(500 + seed);
        let truth = gaussian(&mut r, 30, 3).matmul_transpose(&gaussian(&mut r, 20, 3));
        let z = truth.add(&gaussian(&mut r, 30, 20).scale(0.3));
        let obs = full_observations(&z);
        let alpha = 1.0;
        let lambda = 0.1 * singular_values(&na(&z))[0];
        let reference = prox_reference_solver(&z, alpha, lambda, 1e-8).unwrap();
        let f_star = prox_objective(&reference, &obs, alpha, lambda).unwrap();

        let (k, n, iters) = (5, 20, 2000);
        let base = 0.5 * k as f64 / (2.0 * alpha * n as f64);
        let schedule = (0..iters).map(|t| base / ((t + 1) as f64).sqrt()).collect();
        let cfg = SsgdConfig::new(lambda, iters, StepSize::Schedule(schedule), k, z.frobenius_norm());
        let loss = ObservedLoss::squared(alpha, &obs);
        let out = basic_ssgd(&loss, &cfg, &mut RngState::new(seed)).unwrap();
        gaps.push((out.best_objective - f_star) / f_star);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    verdict(mean <= 0.02, format!("mean relative objective gap over 5 seeds = {mean:.5} (limit 0.02)"))
}

fn c6_recovery() -> Verdict {
    let prob = gen_synthetic::<f64>(200, 150, 5, 0.3, 0.0, 0).unwrap();
    let cfg = CompletionConfig { rank: 5, k: Some(5), super_iters: 30, timing: false, ..Default::default() };
    let x = train(&prob.train, None, &cfg, &mut NullSink).unwrap();
    let (mut sse, mut ss) = (0.0, 0.0);
    for (i, j, v) in prob.test.iter() {
        sse += (x.entry(i, j) - v).powi(2);
        ss += v * v;
    }
    let rel = (sse / ss).sqrt();
    verdict(rel <= 0.05, format!("relative test RMSE after 30 super-iterations = {rel:.4} (limit 0.05)"))
}

fn c7_convergence_trend() -> Verdict {
    let mut r = rng(700);
    let (m, n) = (20, 15);
    let truth = gaussian(&mut r, m, 2).matmul_transpose(&gaussian(&mut r, n, 2));
    let mut trip = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if r.random_bool(0.5) {
                let noise: f64 = StandardNormal.sample(&mut r);
                trip.push((i, j, truth[(i, j)] + 0.3 * noise));
            }
        }
    }
    let z = SparseObservations::from_triplets(m, n, trip, DuplicatePolicy::Reject).unwrap();
    let (alpha, lambda) = (1.0, 1.0);
    let reference = prox_reference_solver_masked(&z, alpha, lambda, 1e-12).unwrap();
    let f_star = prox_objective(&reference, &z, alpha, lambda).unwrap();
    let delta = 2.0 * reference.frobenius_norm();
    let g_bound = 2.0 * alpha * (delta + z.frobenius_norm_sq().sqrt());
    let k = 3;
    let loss = ObservedLoss::squared(alpha, &z);

    let mean_gap = |iters: usize| {
        let eta = theorem_step_size(k, delta, n, g_bound, lambda, m.min(n), iters, 1.0).unwrap();
        let cfg = SsgdConfig::new(lambda, iters, StepSize::Fixed(eta), k, delta);
        (0..20u64).map(|seed| basic_ssgd(&loss, &cfg, &mut RngState::new(seed)).unwrap().best_objective - f_star).sum::<f64>()
            / 20.0
    };
    let (short, long) = (mean_gap(400), mean_gap(1600));
    verdict(long < short, format!("mean best-objective gap: T=400 {short:.4}, T=1600 {long:.4}"))
}

fn c8_cost_scaling() -> Verdict {
    let cfg = BenchConfig { m_list: vec![1_000, 10_000, 100_000], n: 500, rank: 10, k: 10, iters: 15, seed: 8 };
    let rows = bench_iterations(&cfg).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for w in rows.windows(2) {
        let growth = w[1].median_seconds / w[0].median_seconds;
        let linear = w[1].m as f64 / w[0].m as f64;
        ok &= growth <= 3.0 * linear && growth >= linear / 3.0;
        parts.push(format!("m {}→{}: ×{growth:.2} (linear ×{linear})", w[0].m, w[1].m));
    }
    verdict(ok, parts.join(", "))
}

fn c9_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_nnssgd");
    let prefix = dir.path().join("data");
    let synth = Command::new(exe)
        .args([
            "synth",
            "--m",
            "60",
            "--n",
            "40",
            "--rank",
            "3",
            "--density",
            "0.3",
            "--noise",
            "0.1",
            "--seed",
            "9",
            "--out-prefix",
        ])
        .arg(&prefix)
        .output()
        .unwrap();
    if !synth.status.success() {
        return verdict(false, format!("synth failed: {}", String::from_utf8_lossy(&synth.stderr)));
    }
    let run = |tag: &str| -> Result<(Vec<u8>, Vec<u8>), String> {
        let model = dir.path().join(format!("{tag}.nnsvd"));
        let metrics = dir.path().join(format!("{tag}.csv"));
        let out = Command::new(exe)
            .args(["train", "--rank", "3", "--super-iters", "5", "--seed", "11", "--threads", "1", "--no-timing"])
            .args([Path::new("--train"), &prefix.with_extension("train")])
            .args([Path::new("--test"), &prefix.with_extension("test")])
            .args([Path::new("--model-out"), &model, Path::new("--metrics-out"), &metrics])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        Ok((fs::read(&model).map_err(|e| e.to_string())?, fs::read(&metrics).map_err(|e| e.to_string())?))
    };
    match (run("a"), run("b")) {
        (Ok(a), Ok(b)) => verdict(a == b, format!("model identical: {}, metrics identical: {}", a.0 == b.0, a.1 == b.1)),
        (Err(e), _) | (_, Err(e)) => verdict(false, format!("train failed: {e}")),
    }
}

fn c10_fuzz() -> Verdict {
    let mut r = rng(1000);
    let mut violations = 0;
    let mut worst_ortho = 0.0f64;
    for call in 0..10_000 {
        let m = r.random_range(1..25);
        let n = r.random_range(1..20);
        let p = r.random_range(0..=m.min(n).min(6));
        let k = r.random_range(1..=n.min(5));
        let x = random_compact(&mut r, m, n, p);
        let s = gaussian(&mut r, m, k).scale(10f64.powf(r.random_range(-3.0..3.0)));
        let y = sample_probe::<f64>(KINDS[call % 3], n, k, &mut RngState::new(r.random())).unwrap();
        let eta = 10f64.powf(r.random_range(-4.0..2.0));
        let cap = r.random_range(1..=8);
        let delta = 10f64.powf(r.random_range(-2.0..2.0));
        let out = incremental_update(&x, &s, &y, eta, cap, delta, ProbeScaling::Unbiased).unwrap();
        let sigma = out.sigma();
        let norm = sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ortho = out.orthonormality_error();
        worst_ortho = worst_ortho.max(ortho);
        if out.rank() > cap || sigma.windows(2).any(|w| w[0] < w[1]) || norm > delta * (1.0 + 1e-12) || ortho > 1e-8 {
            violations += 1;
        }
    }
    verdict(violations == 0, format!("10000 calls, {violations} violations, worst orthonormality error {worst_ortho:.1e}"))
}

type Criterion = (&'static str, fn() -> Verdict, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("probe isotropy", c1_isotropy, Duration::from_secs(10)),
        ("variance identity", c2_variance, Duration::from_secs(10)),
        ("incremental update oracle", c3_update_oracle, Duration::from_secs(30)),
        ("best rank-t truncation", c4_truncation, Duration::from_secs(10)),
        ("solver vs prox reference", c5_solver_vs_prox, Duration::from_secs(60)),
        ("synthetic recovery", c6_recovery, Duration::from_secs(60)),
        ("convergence trend", c7_convergence_trend, Duration::from_secs(120)),
        ("per-iteration cost scaling", c8_cost_scaling, Duration::from_secs(300)),
        ("end-to-end determinism", c9_determinism, Duration::from_secs(300)),
        ("feasibility under fuzzing", c10_fuzz, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        let timing = if elapsed <= budget { String::new() } else { format!(" [over time budget of {budget:?}]") };
        println!(
            "criterion {:>2} {}: {name}: {} ({:.2}s){timing}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
