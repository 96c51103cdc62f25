//! Per-iteration timing of the probe-and-update step.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{DuplicatePolicy, SparseObservations};
use crate::error::{Error, Result};
use crate::linalg::{reduced_qr, CompactSvd, DenseMatrix};
use crate::loss::ObservedLoss;
use crate::probing::{ProbeKind, ProbeScaling, RngState};
use crate::ssgd::SolverState;

/// Observed entries per row in the benchmark problems.
pub const BENCH_ENTRIES_PER_ROW: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRow {
    pub m: usize,
    pub median_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub m_list: Vec<usize>,
    pub n: usize,
    pub rank: usize,
    pub k: usize,
    pub iters: usize,
    pub seed: u64,
}

/// Median wall time of one solver iteration at each `m`, starting from a
/// random rank-`r` iterate so every step works at full rank.
pub fn bench_iterations(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.iters == 0 || cfg.rank == 0 || cfg.k == 0 || cfg.k > cfg.n {
        return Err(Error::invalid("bench needs iters >= 1, rank >= 1 and 1 <= k <= n"));
    }
    cfg.m_list.iter().map(|&m| bench_one(m, cfg).map(|t| BenchRow { m, median_seconds: t })).collect()
}

fn bench_one(m: usize, cfg: &BenchConfig) -> Result<f64> {
    let n = cfg.n;
    if cfg.rank > m.min(n) {
        return Err(Error::invalid(format!("rank {} exceeds min({m}, {n})", cfg.rank)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ m as u64);
    let per_row = BENCH_ENTRIES_PER_ROW.min(n);
    let mut trip = Vec::with_capacity(m * per_row);
    for i in 0..m {
        for _ in 0..per_row {
            trip.push((i, rng.random_range(0..n), rng.random_range(1.0..5.0)));
        }
    }
    let z = SparseObservations::from_triplets(m, n, trip, DuplicatePolicy::LastWins)?;

    let mut gaussian = |rows: usize| {
        DenseMatrix::from_fn(rows, cfg.rank, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x
        })
    };
    let (u, _) = reduced_qr(&gaussian(m))?;
    let (v, _) = reduced_qr(&gaussian(n))?;
    let sigma: Vec<f64> = (0..cfg.rank).map(|l| (cfg.rank - l) as f64).collect();
    let x0 = CompactSvd::from_parts(u, sigma, v)?;
    let radius = 10.0 * x0.frobenius_norm();

    let loss = ObservedLoss::squared(1.0 / z.frobenius_norm_sq(), &z);
    let mut state = SolverState::start(x0, &loss, 1e-3);
    let mut probes = RngState::new(cfg.seed);
    let mut times = Vec::with_capacity(cfg.iters);
    for _ in 0..cfg.iters {
        let t0 = Instant::now();
        state.step(&loss, 1e-3, 1e-3, cfg.k, ProbeKind::ColumnSampling, cfg.rank, radius, ProbeScaling::Unbiased, &mut probes)?;
        times.push(t0.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    Ok(if times.len() % 2 == 1 { times[mid] } else { 0.5 * (times[mid - 1] + times[mid]) })
}
