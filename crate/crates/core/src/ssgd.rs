//! Stochastic subgradient descent on `F(X) = f(X) + λ‖X‖_*` over the ball
//! `‖X‖_F ≤ Δ`, with iterates kept as compact SVDs.
//!
//! Each step probes the subgradient `G = ∇f(X) + λ·U·Vᵀ` with a random
//! `n × k` matrix `Y`, giving the rank-`k` step `S·Yᵀ` with `S = G·Y`. The
//! new iterate `X − η·S·Yᵀ` is re-factored from the two tall factors
//! `[U·Σ | S]` and `[V | −η·Y]` with two thin QRs and one small SVD, so no
//! `m × n` matrix is ever formed.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{significant_count, small_svd, thin_qr, CompactSvd, DenseMatrix};
use crate::loss::SumLoss;
use crate::probing::{sample_probe, ProbeKind, ProbeMatrix, ProbeScaling, RngState};
use crate::scalar::Scalar;

/// Below this many scalar operations the column evaluations stay sequential.
const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

/// Scales `σ` so that `‖X‖_F ≤ Δ`. Singular vectors are untouched.
pub fn project_k<T: Scalar>(x: &CompactSvd<T>, delta: T) -> Result<CompactSvd<T>> {
    if !(delta > T::zero()) {
        return Err(Error::invalid(format!("ball radius must be positive, got {delta}")));
    }
    let norm = x.frobenius_norm();
    let mut out = x.clone();
    if norm > delta {
        out.scale_sigma(delta / norm);
    }
    Ok(out)
}

/// The nuclear-norm subgradient `U·Vᵀ`, held as its factors.
#[derive(Clone, Copy, Debug)]
pub struct NuclearSubgradient<'a, T> {
    pub u: &'a DenseMatrix<T>,
    pub v: &'a DenseMatrix<T>,
}

impl<T: Scalar> NuclearSubgradient<'_, T> {
    /// `‖U·Vᵀ‖_F = √rank`.
    pub fn frobenius_norm(&self) -> T {
        T::from_usize_lossy(self.u.cols()).sqrt()
    }

    pub fn densify(&self) -> DenseMatrix<T> {
        self.u.matmul_transpose(self.v)
    }
}

pub fn nuclear_subgradient_term<T: Scalar>(x: &CompactSvd<T>) -> NuclearSubgradient<'_, T> {
    NuclearSubgradient { u: x.u(), v: x.v() }
}

/// `S = (∇f(X) + λ·U·Vᵀ)·Y`, an `m × k` matrix.
///
/// With column sampling only the `k` probed columns of `X` are rebuilt from
/// the factors, costing `O(m·k·rank)` plus the loss evaluations on those
/// columns.
pub fn subgradient_probe<T, L>(x: &CompactSvd<T>, loss: &L, lambda: T, y: &ProbeMatrix<T>) -> Result<DenseMatrix<T>>
where
    T: Scalar,
    L: SumLoss<T> + ?Sized,
{
    if !(lambda >= T::zero()) {
        return Err(Error::invalid(format!("regularization weight must be non-negative, got {lambda}")));
    }
    let (m, n) = (x.nrows(), x.ncols());
    if loss.dims() != (m, n) {
        return Err(Error::invalid(format!("loss is {:?} but iterate is {m}x{n}", loss.dims())));
    }
    if y.n() != n {
        return Err(Error::invalid(format!("probe dimension {} does not match {n} columns", y.n())));
    }
    let p = x.rank();
    let u = x.u();

    // Column j of G = ∇f(X) + λ U Vᵀ.
    let g_column = |j: usize| -> Vec<T> {
        let vj = x.v().row(j);
        let xw: Vec<T> = vj.iter().zip(x.sigma()).map(|(&v, &s)| v * s).collect();
        let lw: Vec<T> = vj.iter().map(|&v| lambda * v).collect();
        let mut xcol = vec![T::zero(); m];
        let mut reg = vec![T::zero(); m];
        for i in 0..m {
            let ui = u.row(i);
            let (mut a, mut b) = (T::zero(), T::zero());
            for l in 0..p {
                a += ui[l] * xw[l];
                b += ui[l] * lw[l];
            }
            xcol[i] = a;
            reg[i] = b;
        }
        let mut g = vec![T::zero(); m];
        loss.column_subgradient(j, &xcol, &mut g);
        for (gi, ri) in g.iter_mut().zip(reg) {
            *gi += ri;
        }
        g
    };

    match y {
        ProbeMatrix::Columns { indices, scale, .. } => {
            let columns: Vec<Vec<T>> = if m * indices.len() * (p + 1) >= PARALLEL_WORK_THRESHOLD {
                indices.par_iter().map(|&c| g_column(c)).collect()
            } else {
                indices.iter().map(|&c| g_column(c)).collect()
            };
            let mut s = DenseMatrix::zeros(m, indices.len());
            for (l, col) in columns.iter().enumerate() {
                for (i, &g) in col.iter().enumerate() {
                    s[(i, l)] = *scale * g;
                }
            }
            Ok(s)
        }
        ProbeMatrix::Dense { matrix, .. } => {
            let k = matrix.cols();
            let mut s = DenseMatrix::zeros(m, k);
            for j in 0..n {
                let g = g_column(j);
                let yrow = matrix.row(j);
                for (i, &gi) in g.iter().enumerate() {
                    for (o, &w) in s.row_mut(i).iter_mut().zip(yrow) {
                        *o += gi * w;
                    }
                }
            }
            Ok(s)
        }
    }
}

/// Compact SVD of `Π_K(TSVD(X − η·S·Yᵀ, r))` without forming any `m × n`
/// matrix. Cost is dominated by the thin QR of the `m × (p + k)` factor.
pub fn incremental_update<T: Scalar>(
    x: &CompactSvd<T>,
    s: &DenseMatrix<T>,
    y: &ProbeMatrix<T>,
    eta: T,
    rank_cap: usize,
    delta: T,
    scaling: ProbeScaling,
) -> Result<CompactSvd<T>> {
    let (m, n) = (x.nrows(), x.ncols());
    if s.rows() != m || s.cols() != y.k() {
        return Err(Error::invalid(format!(
            "S is {}x{} but expected {m}x{} for a width-{} probe",
            s.rows(),
            s.cols(),
            y.k(),
            y.k()
        )));
    }
    if y.n() != n {
        return Err(Error::invalid(format!("probe dimension {} does not match {n} columns", y.n())));
    }
    if !eta.is_finite() {
        return Err(Error::invalid("step size must be finite"));
    }
    if rank_cap == 0 {
        return Err(Error::invalid("rank cap must be at least 1"));
    }
    if !(delta > T::zero()) {
        return Err(Error::invalid(format!("ball radius must be positive, got {delta}")));
    }
    if !s.is_finite() {
        return Err(Error::numerical("incremental_update", "subgradient probe contains non-finite entries"));
    }

    let left = x.u().scale_columns(x.sigma()).hstack(s);
    let right = x.v().hstack(&y.update_factor(scaling).scale(-eta));
    let (qu, ru) = thin_qr(&left);
    let (qv, rv) = thin_qr(&right);
    let core = ru.matmul_transpose(&rv);
    let (mm, sigma, nn) = small_svd(&core)?;

    let keep = significant_count(&sigma, m, n).min(rank_cap);
    let u = qu.matmul(&mm.leading_columns(keep));
    let v = qv.matmul(&nn.leading_columns(keep));
    let next = CompactSvd::from_parts(u, sigma[..keep].to_vec(), v)?;
    project_k(&next, delta)
}

/// `F(X) = f(X) + λ·‖X‖_*`.
pub fn objective<T, L>(x: &CompactSvd<T>, loss: &L, lambda: T) -> T
where
    T: Scalar,
    L: SumLoss<T> + ?Sized,
{
    loss.total_value(x) + lambda * x.nuclear_norm()
}

/// Fixed step size from the convergence analysis:
/// `η = β·√k·Δ / (√n·(G + λ√r)·√T)`.
#[allow(clippy::too_many_arguments)]
pub fn theorem_step_size<T: Scalar>(
    k: usize,
    delta: T,
    n: usize,
    g_bound: T,
    lambda: T,
    r: usize,
    iterations: usize,
    beta: T,
) -> Result<T> {
    if k == 0 || n == 0 || r == 0 || iterations == 0 {
        return Err(Error::invalid("k, n, r and T must be positive"));
    }
    if !(delta > T::zero()) || !(g_bound > T::zero()) || !(beta > T::zero()) {
        return Err(Error::invalid("Δ, G and β must be positive"));
    }
    if !(lambda >= T::zero()) {
        return Err(Error::invalid("λ must be non-negative"));
    }
    let sq = |v: usize| T::from_usize_lossy(v).sqrt();
    Ok(beta * sq(k) * delta / (sq(n) * (g_bound + lambda * sq(r)) * sq(iterations)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepSize<T> {
    Fixed(T),
    /// `η⁽ᵗ⁾` for `t = 0, 1, …`; the last value repeats if the list runs out.
    Schedule(Vec<T>),
}

impl<T: Scalar> StepSize<T> {
    pub fn at(&self, t: usize) -> T {
        match self {
            StepSize::Fixed(eta) => *eta,
            StepSize::Schedule(v) => v.get(t).or(v.last()).copied().unwrap_or_else(T::zero),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SsgdConfig<T> {
    pub lambda: T,
    pub iterations: usize,
    pub step: StepSize<T>,
    pub k: usize,
    pub probe: ProbeKind,
    /// `None` disables rank enforcement (cap `min(m, n)`).
    pub rank_cap: Option<usize>,
    pub delta: T,
    pub scaling: ProbeScaling,
    /// Evaluate `F` every this many iterations (and after the last one).
    pub eval_every: usize,
}

impl<T: Scalar> SsgdConfig<T> {
    pub fn new(lambda: T, iterations: usize, step: StepSize<T>, k: usize, delta: T) -> Self {
        Self {
            lambda,
            iterations,
            step,
            k,
            probe: ProbeKind::ColumnSampling,
            rank_cap: None,
            delta,
            scaling: ProbeScaling::Unbiased,
            eval_every: 1,
        }
    }
}

/// Mutable state of a run.
#[derive(Clone, Debug)]
pub struct SolverState<T> {
    pub x: CompactSvd<T>,
    /// Number of completed iterations.
    pub t: usize,
    pub best_objective: T,
    pub best_x: CompactSvd<T>,
    /// Objective of `x` if it was evaluated at this iteration.
    pub last_objective: Option<T>,
}

impl<T: Scalar> SolverState<T> {
    pub fn start<L: SumLoss<T> + ?Sized>(x0: CompactSvd<T>, loss: &L, lambda: T) -> Self {
        let f0 = objective(&x0, loss, lambda);
        Self { best_x: x0.clone(), x: x0, t: 0, best_objective: f0, last_objective: Some(f0) }
    }

    /// One probe-and-update step.
    #[allow(clippy::too_many_arguments)]
    pub fn step<L: SumLoss<T> + ?Sized>(
        &mut self,
        loss: &L,
        lambda: T,
        eta: T,
        k: usize,
        probe: ProbeKind,
        rank_cap: usize,
        delta: T,
        scaling: ProbeScaling,
        rng: &mut RngState,
    ) -> Result<()> {
        let y = sample_probe(probe, self.x.ncols(), k, rng)?;
        let s = subgradient_probe(&self.x, loss, lambda, &y)?;
        self.x = incremental_update(&self.x, &s, &y, eta, rank_cap, delta, scaling)?;
        self.t += 1;
        self.last_objective = None;
        Ok(())
    }

    /// Evaluates `F` at the current iterate and updates the best-so-far.
    pub fn evaluate<L: SumLoss<T> + ?Sized>(&mut self, loss: &L, lambda: T) -> T {
        let f = objective(&self.x, loss, lambda);
        self.last_objective = Some(f);
        if f < self.best_objective {
            self.best_objective = f;
            self.best_x = self.x.clone();
        }
        f
    }
}

#[derive(Clone, Debug)]
pub struct SsgdOutcome<T> {
    /// Iterate with the lowest evaluated objective (including `X⁰ = 0`).
    pub best: CompactSvd<T>,
    pub best_objective: T,
    pub last: CompactSvd<T>,
    /// `(iteration, F)` for every evaluation, starting with `(0, F(0))`.
    pub trace: Vec<(usize, T)>,
}

/// Basic SSGD from `X⁰ = 0`, returning the best visited iterate.
pub fn basic_ssgd<T, L>(loss: &L, config: &SsgdConfig<T>, rng: &mut RngState) -> Result<SsgdOutcome<T>>
where
    T: Scalar,
    L: SumLoss<T> + ?Sized,
{
    basic_ssgd_observed(loss, config, rng, |_| {})
}

/// [`basic_ssgd`] with a callback invoked after every iteration.
pub fn basic_ssgd_observed<T, L, F>(
    loss: &L,
    config: &SsgdConfig<T>,
    rng: &mut RngState,
    mut observe: F,
) -> Result<SsgdOutcome<T>>
where
    T: Scalar,
    L: SumLoss<T> + ?Sized,
    F: FnMut(&SolverState<T>),
{
    let (m, n) = loss.dims();
    if !(config.delta > T::zero()) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    if config.k == 0 || config.k > n {
        return Err(Error::invalid(format!("probe width k={} must satisfy 1 <= k <= n={n}", config.k)));
    }
    let cap = config.rank_cap.unwrap_or(m.min(n));
    let every = config.eval_every.max(1);
    let mut state = SolverState::start(CompactSvd::zero(m, n), loss, config.lambda);
    let mut trace = vec![(0, state.best_objective)];
    for t in 0..config.iterations {
        state.step(loss, config.lambda, config.step.at(t), config.k, config.probe, cap, config.delta, config.scaling, rng)?;
        if state.t % every == 0 || state.t == config.iterations {
            let f = state.evaluate(loss, config.lambda);
            trace.push((state.t, f));
        }
        observe(&state);
    }
    Ok(SsgdOutcome { best: state.best_x, best_objective: state.best_objective, last: state.x, trace })
}
