//! Nuclear-norm regularized matrix completion with the stochastic solver.
//!
//! The problem is `min α‖P_Ω(X) − Z‖_F² + β‖X‖_*`. Training starts from the
//! rank-`r` truncated SVD of the observations and runs `s` super-iterations
//! of `⌈n/r⌉` probe-and-update steps each.

use std::time::Instant;

use crate::data::SparseObservations;
use crate::error::{Error, Result};
use crate::linalg::{tsvd_sparse, CompactSvd};
use crate::loss::{LossKind, ObservedLoss};
use crate::probing::{ProbeKind, ProbeScaling, RngState};
use crate::scalar::Scalar;
use crate::ssgd::SolverState;

/// Which iterate [`train`] returns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModelSelection {
    #[default]
    Final,
    /// Lowest objective among the warm start and the super-iteration
    /// checkpoints.
    BestObjective,
}

impl std::str::FromStr for ModelSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "final" => Ok(Self::Final),
            "best" => Ok(Self::BestObjective),
            other => Err(Error::invalid(format!("unknown model selection '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionConfig<T> {
    /// Rank cap `r`.
    pub rank: usize,
    /// Number of super-iterations `s`.
    pub super_iters: usize,
    /// Normalized regularization `δ`.
    pub delta: T,
    /// Normalized step size `ν`.
    pub nu: T,
    /// Probe width; `None` means `k = r`.
    pub k: Option<usize>,
    pub probe: ProbeKind,
    pub loss: LossKind,
    pub seed: u64,
    /// Residuals only on observed cells (the default). When false, unobserved
    /// cells are fitted to zero.
    pub masked: bool,
    pub scaling: ProbeScaling,
    pub selection: ModelSelection,
    /// Emit a metrics record every this many super-iterations.
    pub metrics_every: usize,
    /// Record elapsed wall time in the metrics. Disable for reproducible logs.
    pub timing: bool,
}

impl<T: Scalar> Default for CompletionConfig<T> {
    fn default() -> Self {
        Self {
            rank: 10,
            super_iters: 10,
            delta: T::lit(0.015),
            nu: T::lit(0.005),
            k: None,
            probe: ProbeKind::ColumnSampling,
            loss: LossKind::Squared,
            seed: 0,
            masked: true,
            scaling: ProbeScaling::Unbiased,
            selection: ModelSelection::Final,
            metrics_every: 1,
            timing: true,
        }
    }
}

impl<T: Scalar> CompletionConfig<T> {
    pub fn probe_width(&self) -> usize {
        self.k.unwrap_or(self.rank)
    }

    /// Iterations per super-iteration, `⌈n/r⌉`.
    pub fn super_iteration_len(&self, n: usize) -> usize {
        n.div_ceil(self.rank.max(1))
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.rank == 0 || self.rank > m.min(n) {
            return Err(Error::invalid(format!("rank {} outside 1..={}", self.rank, m.min(n))));
        }
        if !(self.delta > T::zero()) || !self.delta.is_finite() {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.nu > T::zero()) || !self.nu.is_finite() {
            return Err(Error::invalid(format!("nu must be positive, got {}", self.nu)));
        }
        let k = self.probe_width();
        if k == 0 || k > n {
            return Err(Error::invalid(format!("probe width {k} outside 1..={n}")));
        }
        if self.metrics_every == 0 {
            return Err(Error::invalid("metrics cadence must be at least 1"));
        }
        Ok(())
    }
}

/// Additive offsets `(μᵢ + μ̂ⱼ)/2` removed before training.
#[derive(Clone, Debug, PartialEq)]
pub struct Centering<T> {
    /// Per-row training means; rows without ratings hold the global mean.
    pub row_means: Vec<T>,
    pub col_means: Vec<T>,
    pub global_mean: T,
}

impl<T: Scalar> Centering<T> {
    pub fn none(m: usize, n: usize) -> Self {
        Self { row_means: vec![T::zero(); m], col_means: vec![T::zero(); n], global_mean: T::zero() }
    }

    pub fn from_train(train: &SparseObservations<T>) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("cannot center an empty training set"));
        }
        let (m, n) = (train.nrows(), train.ncols());
        let global_mean = train.values().iter().copied().sum::<T>() / T::from_usize_lossy(train.nnz());
        let mut row_sum = vec![T::zero(); m];
        let mut row_cnt = vec![0usize; m];
        let mut col_sum = vec![T::zero(); n];
        let mut col_cnt = vec![0usize; n];
        for (i, j, v) in train.iter() {
            row_sum[i] += v;
            row_cnt[i] += 1;
            col_sum[j] += v;
            col_cnt[j] += 1;
        }
        let mean = |s: T, c: usize| if c == 0 { global_mean } else { s / T::from_usize_lossy(c) };
        Ok(Self {
            row_means: row_sum.into_iter().zip(row_cnt).map(|(s, c)| mean(s, c)).collect(),
            col_means: col_sum.into_iter().zip(col_cnt).map(|(s, c)| mean(s, c)).collect(),
            global_mean,
        })
    }

    /// Offset for a cell; unknown indices fall back to the global mean.
    pub fn offset(&self, i: Option<usize>, j: Option<usize>) -> T {
        let mu = i.and_then(|i| self.row_means.get(i).copied()).unwrap_or(self.global_mean);
        let nu = j.and_then(|j| self.col_means.get(j).copied()).unwrap_or(self.global_mean);
        (mu + nu) * T::lit(0.5)
    }

    pub fn center(&self, obs: &SparseObservations<T>) -> Result<SparseObservations<T>> {
        self.check_dims(obs)?;
        Ok(obs.map_values(|i, j, v| v - self.offset(Some(i), Some(j))))
    }

    pub fn uncenter(&self, obs: &SparseObservations<T>) -> Result<SparseObservations<T>> {
        self.check_dims(obs)?;
        Ok(obs.map_values(|i, j, v| v + self.offset(Some(i), Some(j))))
    }

    fn check_dims(&self, obs: &SparseObservations<T>) -> Result<()> {
        if (obs.nrows(), obs.ncols()) != (self.row_means.len(), self.col_means.len()) {
            return Err(Error::invalid(format!(
                "observations are {}x{} but centering is {}x{}",
                obs.nrows(),
                obs.ncols(),
                self.row_means.len(),
                self.col_means.len()
            )));
        }
        Ok(())
    }
}

/// Centered training set, centered test set if given, and the offsets used.
pub type Centered<T> = (SparseObservations<T>, Option<SparseObservations<T>>, Centering<T>);

/// Subtracts `(μᵢ + μ̂ⱼ)/2` from every train and test value, with means taken
/// from the training set only.
pub fn preprocess_center<T: Scalar>(train: &SparseObservations<T>, test: Option<&SparseObservations<T>>) -> Result<Centered<T>> {
    let c = Centering::from_train(train)?;
    let tr = c.center(train)?;
    let te = test.map(|t| c.center(t)).transpose()?;
    Ok((tr, te, c))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedParams<T> {
    /// Loss weight `α = 1/‖Z‖_F²`.
    pub alpha: T,
    /// Nuclear-norm weight `β`.
    pub beta_reg: T,
    /// Ball radius `Δ = α·‖Z‖_F²/β`.
    pub ball_radius: T,
    /// Step size `η = ν·‖Z‖_F²`.
    pub eta: T,
}

/// Warm start `X⁰ = TSVD(Z, r)` and the parameter heuristics.
///
/// `β = δ·f(X⁰)/(‖Z‖_F²·‖X⁰‖_*)` with `f(X⁰) = ‖P_Ω(X⁰) − Z‖_F²` taken
/// without the `α` weight, so that `αf` lies in `[0, 1]` and the heuristics
/// are invariant to rescaling `Z`.
pub fn init_params<T: Scalar>(
    z: &SparseObservations<T>,
    rank: usize,
    delta: T,
    nu: T,
) -> Result<(DerivedParams<T>, CompactSvd<T>)> {
    let zf2 = z.frobenius_norm_sq();
    if z.is_empty() || zf2 == T::zero() {
        return Err(Error::invalid("training observations are empty or all zero"));
    }
    if !zf2.is_finite() {
        return Err(Error::numerical("init_params", "squared norm of the training data overflows"));
    }
    if !(delta > T::zero()) || !(nu > T::zero()) {
        return Err(Error::invalid("delta and nu must be positive"));
    }
    let x0 = tsvd_sparse(z, rank)?;
    let nuclear = x0.nuclear_norm();
    let fit: T = z.iter().map(|(i, j, v)| (x0.entry(i, j) - v) * (x0.entry(i, j) - v)).sum();
    if nuclear == T::zero() {
        return Err(Error::invalid("degenerate warm start: TSVD of the training data is zero"));
    }
    if (fit / zf2).sqrt() <= T::lit(1e-12) {
        return Err(Error::invalid(format!(
            "degenerate warm start: the rank-{rank} TSVD already fits the training data exactly, so the regularization heuristic is zero; lower the rank or add data"
        )));
    }
    let alpha = T::one() / zf2;
    let beta_reg = delta * fit / (zf2 * nuclear);
    Ok((DerivedParams { alpha, beta_reg, ball_radius: alpha * zf2 / beta_reg, eta: nu * zf2 }, x0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord<T> {
    pub super_iter: usize,
    pub iter: usize,
    /// Seconds since training started; `None` when timing is disabled.
    pub wall_seconds: Option<f64>,
    pub objective: T,
    pub train_rmse: T,
    pub test_rmse: Option<T>,
}

/// Receives metric records in order. Errors are logged and otherwise ignored.
pub trait MetricsSink<T> {
    fn record(&mut self, rec: &MetricRecord<T>) -> std::io::Result<()>;
}

impl<T: Clone> MetricsSink<T> for Vec<MetricRecord<T>> {
    fn record(&mut self, rec: &MetricRecord<T>) -> std::io::Result<()> {
        self.push(rec.clone());
        Ok(())
    }
}

/// Discards every record.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullSink;

impl<T> MetricsSink<T> for NullSink {
    fn record(&mut self, _: &MetricRecord<T>) -> std::io::Result<()> {
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionModel<T> {
    pub factors: CompactSvd<T>,
    pub centering: Centering<T>,
}

impl<T: Scalar> CompletionModel<T> {
    pub fn new(factors: CompactSvd<T>, centering: Centering<T>) -> Result<Self> {
        if (factors.nrows(), factors.ncols()) != (centering.row_means.len(), centering.col_means.len()) {
            return Err(Error::invalid("factor and mean dimensions disagree"));
        }
        Ok(Self { factors, centering })
    }

    pub fn nrows(&self) -> usize {
        self.factors.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.factors.ncols()
    }

    /// `Uᵢ·Σ·Vⱼᵀ + (μᵢ + μ̂ⱼ)/2` in `O(r)`.
    pub fn predict(&self, i: usize, j: usize) -> Result<T> {
        if i >= self.nrows() || j >= self.ncols() {
            return Err(Error::invalid(format!("({i}, {j}) outside {}x{}", self.nrows(), self.ncols())));
        }
        Ok(self.factors.entry(i, j) + self.centering.offset(Some(i), Some(j)))
    }

    /// Prediction for possibly unknown indices: the low-rank term is dropped
    /// and the global mean replaces each missing mean.
    pub fn predict_with_fallback(&self, i: Option<usize>, j: Option<usize>) -> T {
        let i = i.filter(|&i| i < self.nrows());
        let j = j.filter(|&j| j < self.ncols());
        let low_rank = match (i, j) {
            (Some(i), Some(j)) => self.factors.entry(i, j),
            _ => T::zero(),
        };
        low_rank + self.centering.offset(i, j)
    }

    /// Root mean squared error against raw-scale observations.
    pub fn rmse(&self, test: &SparseObservations<T>) -> Result<T> {
        if test.is_empty() {
            return Err(Error::invalid("RMSE of an empty test set"));
        }
        if (test.nrows(), test.ncols()) != (self.nrows(), self.ncols()) {
            return Err(Error::invalid("test set dimensions do not match the model"));
        }
        let sse: T = test
            .iter()
            .map(|(i, j, v)| {
                let d = self.factors.entry(i, j) + self.centering.offset(Some(i), Some(j)) - v;
                d * d
            })
            .sum();
        Ok((sse / T::from_usize_lossy(test.nnz())).sqrt())
    }
}

fn factor_rmse<T: Scalar>(x: &CompactSvd<T>, obs: &SparseObservations<T>) -> T {
    if obs.is_empty() {
        return T::zero();
    }
    let sse: T = obs.iter().map(|(i, j, v)| (x.entry(i, j) - v) * (x.entry(i, j) - v)).sum();
    (sse / T::from_usize_lossy(obs.nnz())).sqrt()
}

/// Trains on already-centered data; the returned factors carry no offsets.
pub fn train<T: Scalar>(
    z: &SparseObservations<T>,
    test: Option<&SparseObservations<T>>,
    config: &CompletionConfig<T>,
    sink: &mut dyn MetricsSink<T>,
) -> Result<CompactSvd<T>> {
    config.validate(z.nrows(), z.ncols())?;
    let (params, x0) = init_params(z, config.rank, config.delta, config.nu)?;
    log::info!(
        "alpha={} beta={} radius={} eta={} warm-start rank {}",
        params.alpha,
        params.beta_reg,
        params.ball_radius,
        params.eta,
        x0.rank()
    );
    run_from(z, test, &params, x0, config, sink)
}

/// The training loop with explicit parameters and starting point.
pub fn run_from<T: Scalar>(
    z: &SparseObservations<T>,
    test: Option<&SparseObservations<T>>,
    params: &DerivedParams<T>,
    x0: CompactSvd<T>,
    config: &CompletionConfig<T>,
    sink: &mut dyn MetricsSink<T>,
) -> Result<CompactSvd<T>> {
    let (m, n) = (z.nrows(), z.ncols());
    config.validate(m, n)?;
    if (x0.nrows(), x0.ncols()) != (m, n) {
        return Err(Error::invalid("starting point has the wrong shape"));
    }
    if let Some(t) = test {
        if (t.nrows(), t.ncols()) != (m, n) {
            return Err(Error::invalid("test set dimensions do not match training"));
        }
    }
    if !(params.ball_radius > T::zero()) || !(params.beta_reg >= T::zero()) || !(params.alpha > T::zero()) {
        return Err(Error::invalid("derived parameters must be positive"));
    }

    let loss = ObservedLoss::new(config.loss, params.alpha, z).with_masking(config.masked);
    let lambda = params.beta_reg;
    let k = config.probe_width();
    let per_super = config.super_iteration_len(n);
    let start = Instant::now();
    let mut rng = RngState::new(config.seed);

    let mut state = SolverState::start(x0, &loss, lambda);
    let mut emit = |state: &SolverState<T>, super_iter: usize, f: T| {
        let rec = MetricRecord {
            super_iter,
            iter: state.t,
            wall_seconds: config.timing.then(|| start.elapsed().as_secs_f64()),
            objective: f,
            train_rmse: factor_rmse(&state.x, z),
            test_rmse: test.filter(|t| !t.is_empty()).map(|t| factor_rmse(&state.x, t)),
        };
        if let Err(e) = sink.record(&rec) {
            log::warn!("metrics sink failed at super-iteration {super_iter}: {e}");
        }
    };
    emit(&state, 0, state.best_objective);

    for s in 1..=config.super_iters {
        for _ in 0..per_super {
            state.step(&loss, lambda, params.eta, k, config.probe, config.rank, params.ball_radius, config.scaling, &mut rng)?;
        }
        let f = state.evaluate(&loss, lambda);
        if !f.is_finite() {
            return Err(Error::numerical("train", format!("objective became {f} at super-iteration {s}")));
        }
        if s % config.metrics_every == 0 || s == config.super_iters {
            emit(&state, s, f);
        }
    }
    Ok(match config.selection {
        ModelSelection::Final => state.x,
        ModelSelection::BestObjective => state.best_x,
    })
}

/// Centers (optionally), trains and wraps the result with its offsets.
pub fn fit<T: Scalar>(
    train_raw: &SparseObservations<T>,
    test_raw: Option<&SparseObservations<T>>,
    config: &CompletionConfig<T>,
    center: bool,
    sink: &mut dyn MetricsSink<T>,
) -> Result<CompletionModel<T>> {
    let (z, test, centering) = if center {
        preprocess_center(train_raw, test_raw)?
    } else {
        (train_raw.clone(), test_raw.cloned(), Centering::none(train_raw.nrows(), train_raw.ncols()))
    };
    let factors = train(&z, test.as_ref(), config, sink)?;
    CompletionModel::new(factors, centering)
}
