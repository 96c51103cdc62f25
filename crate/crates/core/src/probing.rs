//! Random probing matrices `Y` (`n × k`) with `E[Y Yᵀ] = I`.
//!
//! Three distributions are supported: scaled identity columns sampled with
//! replacement (the default, and the only one with a fast path), Rademacher
//! signs, and Gaussian entries. The dense kinds are stored already divided by
//! `√k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ProbeKind {
    /// Columns drawn i.i.d. from `{√(n/k)·e₁, …, √(n/k)·eₙ}`.
    #[default]
    ColumnSampling,
    /// Entries `±1/√k` with equal probability.
    Rademacher,
    /// Entries `N(0, 1)/√k`.
    Gaussian,
}

impl std::str::FromStr for ProbeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "columns" | "column_sampling" => Ok(Self::ColumnSampling),
            "rademacher" => Ok(Self::Rademacher),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(Error::invalid(format!("unknown probe kind '{other}'"))),
        }
    }
}

/// Deterministic random stream: ChaCha with 8 rounds, keyed by
/// `seed_from_u64(seed)`. Output is identical across platforms.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// How the probe enters the right factor of the rank-`k` step `S·Yᵀ`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProbeScaling {
    /// `S = G·Y` and the right factor is `Y` itself, so `S·Yᵀ = G·Y·Yᵀ` is
    /// an unbiased estimate of `G`.
    #[default]
    Unbiased,
    /// Column-sampling only: the right factor uses unscaled `e_c` columns,
    /// so the step carries `√(n/k)` once instead of `n/k`.
    SingleScale,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProbeMatrix<T> {
    Columns { n: usize, indices: Vec<usize>, scale: T },
    Dense { kind: ProbeKind, matrix: DenseMatrix<T> },
}

/// Draws a probe of width `k` over ambient dimension `n`.
pub fn sample_probe<T: Scalar>(kind: ProbeKind, n: usize, k: usize, rng: &mut RngState) -> Result<ProbeMatrix<T>> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!("probe width k={k} must satisfy 1 <= k <= n={n}")));
    }
    let inv_sqrt_k = T::one() / T::from_usize_lossy(k).sqrt();
    Ok(match kind {
        ProbeKind::ColumnSampling => {
            let indices = (0..k).map(|_| rng.rng().random_range(0..n)).collect();
            let scale = (T::from_usize_lossy(n) / T::from_usize_lossy(k)).sqrt();
            ProbeMatrix::Columns { n, indices, scale }
        }
        ProbeKind::Rademacher => {
            let matrix = DenseMatrix::from_fn(n, k, |_, _| if rng.rng().random::<bool>() { inv_sqrt_k } else { -inv_sqrt_k });
            ProbeMatrix::Dense { kind, matrix }
        }
        ProbeKind::Gaussian => {
            let matrix = DenseMatrix::from_fn(n, k, |_, _| {
                let x: f64 = StandardNormal.sample(rng.rng());
                T::lit(x) * inv_sqrt_k
            });
            ProbeMatrix::Dense { kind, matrix }
        }
    })
}

impl<T: Scalar> ProbeMatrix<T> {
    pub fn kind(&self) -> ProbeKind {
        match self {
            ProbeMatrix::Columns { .. } => ProbeKind::ColumnSampling,
            ProbeMatrix::Dense { kind, .. } => *kind,
        }
    }

    /// Ambient dimension `n`.
    pub fn n(&self) -> usize {
        match self {
            ProbeMatrix::Columns { n, .. } => *n,
            ProbeMatrix::Dense { matrix, .. } => matrix.rows(),
        }
    }

    /// Probe width `k`.
    pub fn k(&self) -> usize {
        match self {
            ProbeMatrix::Columns { indices, .. } => indices.len(),
            ProbeMatrix::Dense { matrix, .. } => matrix.cols(),
        }
    }

    /// Explicit `n × k` matrix `Y`.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        match self {
            ProbeMatrix::Columns { n, indices, scale } => {
                let mut y = DenseMatrix::zeros(*n, indices.len());
                for (l, &c) in indices.iter().enumerate() {
                    y[(c, l)] = *scale;
                }
                y
            }
            ProbeMatrix::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// The `n × k` right factor that multiplies `S` in the update.
    pub fn update_factor(&self, scaling: ProbeScaling) -> DenseMatrix<T> {
        match (self, scaling) {
            (ProbeMatrix::Columns { n, indices, .. }, ProbeScaling::SingleScale) => {
                let mut y = DenseMatrix::zeros(*n, indices.len());
                for (l, &c) in indices.iter().enumerate() {
                    y[(c, l)] = T::one();
                }
                y
            }
            _ => self.to_dense(),
        }
    }
}

/// `A · Y` for an `m × n` matrix `A` available one column at a time.
///
/// Column sampling touches only the `k` sampled columns; dense probes read
/// all `n`.
pub fn apply_probe_right<T, F>(m: usize, mut column: F, y: &ProbeMatrix<T>) -> Result<DenseMatrix<T>>
where
    T: Scalar,
    F: FnMut(usize) -> Result<Vec<T>>,
{
    let k = y.k();
    let mut out = DenseMatrix::zeros(m, k);
    match y {
        ProbeMatrix::Columns { indices, scale, .. } => {
            for (l, &c) in indices.iter().enumerate() {
                let col = column(c)?;
                check_len(&col, m, c)?;
                for (i, &x) in col.iter().enumerate() {
                    out[(i, l)] = *scale * x;
                }
            }
        }
        ProbeMatrix::Dense { matrix, .. } => {
            for j in 0..matrix.rows() {
                let col = column(j)?;
                check_len(&col, m, j)?;
                let yrow = matrix.row(j);
                for (i, &x) in col.iter().enumerate() {
                    for (o, &w) in out.row_mut(i).iter_mut().zip(yrow) {
                        *o += x * w;
                    }
                }
            }
        }
    }
    Ok(out)
}

fn check_len<T>(col: &[T], m: usize, j: usize) -> Result<()> {
    if col.len() != m {
        return Err(Error::invalid(format!("column {j} has length {}, expected {m}", col.len())));
    }
    Ok(())
}

/// The implicit rank-`≤ k` product `S · Yᵀ`, kept as its two factors.
#[derive(Clone, Copy, Debug)]
pub struct ProbedProduct<'a, T> {
    pub s: &'a DenseMatrix<T>,
    pub y: &'a ProbeMatrix<T>,
}

pub fn apply_probe_transpose_right<'a, T: Scalar>(s: &'a DenseMatrix<T>, y: &'a ProbeMatrix<T>) -> Result<ProbedProduct<'a, T>> {
    if s.cols() != y.k() {
        return Err(Error::invalid(format!("S has {} columns but probe width is {}", s.cols(), y.k())));
    }
    Ok(ProbedProduct { s, y })
}

impl<T: Scalar> ProbedProduct<'_, T> {
    /// Right factor as an `n × k` matrix.
    pub fn right_factor(&self, scaling: ProbeScaling) -> DenseMatrix<T> {
        self.y.update_factor(scaling)
    }

    /// Explicit `m × n` product; for tests and small problems only.
    pub fn densify(&self) -> DenseMatrix<T> {
        self.s.matmul_transpose(&self.y.to_dense())
    }
}
