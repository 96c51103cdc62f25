//! Elementwise ("sum") losses `f(X) = Σᵢⱼ fᵢⱼ(Xᵢⱼ)` with convex scalar pieces.

use crate::data::SparseObservations;
use crate::error::{Error, Result};
use crate::linalg::CompactSvd;
use crate::scalar::Scalar;

/// A sum loss over an `m × n` grid.
///
/// Implementors must return a true subgradient from `subgrad_at`; the solver
/// relies on it for unbiasedness, not just descent.
pub trait SumLoss<T: Scalar>: Sync {
    fn dims(&self) -> (usize, usize);

    /// `fᵢⱼ(x)`.
    fn value_at(&self, i: usize, j: usize, x: T) -> T;

    /// An element of `∂fᵢⱼ(x)`.
    fn subgrad_at(&self, i: usize, j: usize, x: T) -> T;

    /// Writes column `j` of `∇f(X)` given column `j` of `X`.
    fn column_subgradient(&self, j: usize, x: &[T], out: &mut [T]) {
        for (i, (o, &xi)) in out.iter_mut().zip(x).enumerate() {
            *o = self.subgrad_at(i, j, xi);
        }
    }

    /// `f(X)`. The default sweeps the full grid in `O(m·n·rank)`.
    fn total_value(&self, x: &CompactSvd<T>) -> T {
        let (_, n) = self.dims();
        let mut acc = T::zero();
        for j in 0..n {
            for (i, xi) in x.column(j).into_iter().enumerate() {
                acc += self.value_at(i, j, xi);
            }
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossKind {
    /// `w·(x − z)²`.
    #[default]
    Squared,
    /// `w·|x − z|`.
    Absolute,
    /// Smoothed hinge on the margin `t = z·x`:
    /// `½ − t` for `t ≤ 0`, `½(1 − t)²` for `0 < t < 1`, `0` for `t ≥ 1`;
    /// targets act as ±1 labels.
    SmoothedHinge,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Self::Squared),
            "absolute" => Ok(Self::Absolute),
            "hinge" | "smoothed_hinge" => Ok(Self::SmoothedHinge),
            other => Err(Error::invalid(format!("unknown loss '{other}'"))),
        }
    }
}

impl LossKind {
    #[inline]
    pub fn value<T: Scalar>(self, x: T, z: T) -> T {
        match self {
            LossKind::Squared => (x - z) * (x - z),
            LossKind::Absolute => (x - z).abs(),
            LossKind::SmoothedHinge => {
                let t = z * x;
                let half = T::lit(0.5);
                if t <= T::zero() {
                    half - t
                } else if t < T::one() {
                    half * (T::one() - t) * (T::one() - t)
                } else {
                    T::zero()
                }
            }
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, x: T, z: T) -> T {
        match self {
            LossKind::Squared => T::lit(2.0) * (x - z),
            LossKind::Absolute => {
                let d = x - z;
                if d > T::zero() {
                    T::one()
                } else if d < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            LossKind::SmoothedHinge => {
                let t = z * x;
                if t <= T::zero() {
                    -z
                } else if t < T::one() {
                    -z * (T::one() - t)
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Weighted loss against observed targets.
///
/// With `masked = true` only cells in `Ω` contribute (the matrix-completion
/// loss `w‖P_Ω(X) − Z‖²` for the squared kind). With `masked = false` cells off
/// `Ω` are fitted to zero, i.e. the zero-filled matrix `Z` is the target.
#[derive(Clone, Copy, Debug)]
pub struct ObservedLoss<'a, T> {
    pub kind: LossKind,
    pub weight: T,
    pub observations: &'a SparseObservations<T>,
    pub masked: bool,
}

impl<'a, T: Scalar> ObservedLoss<'a, T> {
    pub fn new(kind: LossKind, weight: T, observations: &'a SparseObservations<T>) -> Self {
        Self { kind, weight, observations, masked: true }
    }

    /// Squared loss with weight `alpha` on `Ω`.
    pub fn squared(alpha: T, observations: &'a SparseObservations<T>) -> Self {
        Self::new(LossKind::Squared, alpha, observations)
    }

    pub fn with_masking(mut self, masked: bool) -> Self {
        self.masked = masked;
        self
    }
}

impl<T: Scalar> SumLoss<T> for ObservedLoss<'_, T> {
    fn dims(&self) -> (usize, usize) {
        (self.observations.nrows(), self.observations.ncols())
    }

    fn value_at(&self, i: usize, j: usize, x: T) -> T {
        match self.observations.get(i, j) {
            Some(z) => self.weight * self.kind.value(x, z),
            None if self.masked => T::zero(),
            None => self.weight * self.kind.value(x, T::zero()),
        }
    }

    fn subgrad_at(&self, i: usize, j: usize, x: T) -> T {
        match self.observations.get(i, j) {
            Some(z) => self.weight * self.kind.derivative(x, z),
            None if self.masked => T::zero(),
            None => self.weight * self.kind.derivative(x, T::zero()),
        }
    }

    fn column_subgradient(&self, j: usize, x: &[T], out: &mut [T]) {
        if self.masked {
            out.iter_mut().for_each(|o| *o = T::zero());
        } else {
            for (o, &xi) in out.iter_mut().zip(x) {
                *o = self.weight * self.kind.derivative(xi, T::zero());
            }
        }
        let (rows, vals) = self.observations.column(j);
        for (&i, &z) in rows.iter().zip(vals) {
            out[i] = self.weight * self.kind.derivative(x[i], z);
        }
    }

    fn total_value(&self, x: &CompactSvd<T>) -> T {
        let on_omega: T = self.observations.iter().map(|(i, j, z)| self.kind.value(x.entry(i, j), z)).sum();
        if self.masked {
            return self.weight * on_omega;
        }
        match self.kind {
            LossKind::Squared => {
                // Off Ω the target is zero: Σ_{∉Ω} X² = ‖X‖_F² − Σ_Ω X².
                let on_omega_sq: T = self
                    .observations
                    .iter()
                    .map(|(i, j, _)| {
                        let e = x.entry(i, j);
                        e * e
                    })
                    .sum();
                let fro = x.frobenius_norm();
                self.weight * (on_omega + (fro * fro - on_omega_sq).max(T::zero()))
            }
            _ => {
                let (_, n) = self.dims();
                let mut acc = T::zero();
                for j in 0..n {
                    for (i, xi) in x.column(j).into_iter().enumerate() {
                        acc += self.value_at(i, j, xi);
                    }
                }
                acc
            }
        }
    }
}
