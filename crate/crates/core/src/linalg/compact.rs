use crate::error::{Error, Result};
use crate::linalg::{dense::dot, small_svd, DenseMatrix};
use crate::scalar::Scalar;

/// Factored matrix `X = U · diag(σ) · Vᵀ` with orthonormal `U` (`m × p`),
/// orthonormal `V` (`n × p`) and strictly positive, non-increasing `σ`.
///
/// `p = 0` represents the `m × n` zero matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CompactSvd<T> {
    u: DenseMatrix<T>,
    sigma: Vec<T>,
    v: DenseMatrix<T>,
}

impl<T: Scalar> CompactSvd<T> {
    pub fn zero(m: usize, n: usize) -> Self {
        Self { u: DenseMatrix::zeros(m, 0), sigma: Vec::new(), v: DenseMatrix::zeros(n, 0) }
    }

    /// Assembles factors, checking shapes and the ordering/positivity of `σ`.
    /// Orthonormality is the caller's responsibility (see
    /// [`CompactSvd::orthonormality_error`]).
    pub fn from_parts(u: DenseMatrix<T>, sigma: Vec<T>, v: DenseMatrix<T>) -> Result<Self> {
        let p = sigma.len();
        if u.cols() != p || v.cols() != p {
            return Err(Error::invalid(format!(
                "factor widths {} and {} do not match {} singular values",
                u.cols(),
                v.cols(),
                p
            )));
        }
        if sigma.iter().any(|&s| !(s > T::zero()) || !s.is_finite()) {
            return Err(Error::invalid("singular values must be positive and finite"));
        }
        if sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("singular values must be non-increasing"));
        }
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::invalid("factors contain non-finite entries"));
        }
        Ok(Self { u, sigma, v })
    }

    /// Builds a compact SVD from raw thin-SVD output, dropping numerically zero
    /// triplets (`σᵢ ≤ max(m, n) · ε · σ₁`).
    pub(crate) fn from_thin(u: DenseMatrix<T>, sigma: Vec<T>, v: DenseMatrix<T>) -> Self {
        let (m, n) = (u.rows(), v.rows());
        let keep = significant_count(&sigma, m, n);
        Self { u: u.leading_columns(keep), sigma: sigma[..keep].to_vec(), v: v.leading_columns(keep) }
    }

    /// Compact SVD of a dense matrix via [`small_svd`].
    pub fn from_dense(x: &DenseMatrix<T>) -> Result<Self> {
        let (u, s, v) = small_svd(x)?;
        Ok(Self::from_thin(u, s, v))
    }

    #[inline]
    pub fn u(&self) -> &DenseMatrix<T> {
        &self.u
    }

    #[inline]
    pub fn v(&self) -> &DenseMatrix<T> {
        &self.v
    }

    #[inline]
    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.u.rows()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.v.rows()
    }

    pub fn frobenius_norm(&self) -> T {
        self.sigma.iter().map(|&s| s * s).sum::<T>().sqrt()
    }

    pub fn nuclear_norm(&self) -> T {
        self.sigma.iter().copied().sum()
    }

    /// Entry `X[i, j]` in `O(p)`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> T {
        let (ui, vj) = (self.u.row(i), self.v.row(j));
        let mut acc = T::zero();
        for l in 0..self.sigma.len() {
            acc += ui[l] * self.sigma[l] * vj[l];
        }
        acc
    }

    /// Column `X[:, j]` in `O(m·p)`.
    pub fn column(&self, j: usize) -> Vec<T> {
        let w: Vec<T> = self.v.row(j).iter().zip(&self.sigma).map(|(&v, &s)| v * s).collect();
        (0..self.u.rows()).map(|i| dot(self.u.row(i), &w)).collect()
    }

    pub fn densify(&self) -> DenseMatrix<T> {
        self.u.scale_columns(&self.sigma).matmul_transpose(&self.v)
    }

    /// Worst deviation from orthonormality over both factors.
    pub fn orthonormality_error(&self) -> T {
        self.u.orthonormality_error().max(self.v.orthonormality_error())
    }

    /// Scales every singular value by `c > 0`.
    pub(crate) fn scale_sigma(&mut self, c: T) {
        for s in &mut self.sigma {
            *s *= c;
        }
    }

    pub fn into_parts(self) -> (DenseMatrix<T>, Vec<T>, DenseMatrix<T>) {
        (self.u, self.sigma, self.v)
    }
}

/// Number of leading singular values above the numerical-zero threshold
/// `max(m, n) · ε · σ₁`.
pub(crate) fn significant_count<T: Scalar>(sigma: &[T], m: usize, n: usize) -> usize {
    let Some(&s1) = sigma.first() else { return 0 };
    if !(s1 > T::zero()) {
        return 0;
    }
    let cutoff = T::from_usize_lossy(m.max(n)) * T::epsilon() * s1;
    sigma.iter().take_while(|&&s| s > cutoff).count()
}

/// Best rank-`t` approximation: keeps the leading `min(t, p)` triplets.
pub fn truncate_svd<T: Scalar>(x: &CompactSvd<T>, t: usize) -> CompactSvd<T> {
    if t >= x.rank() {
        return x.clone();
    }
    CompactSvd { u: x.u.leading_columns(t), sigma: x.sigma[..t].to_vec(), v: x.v.leading_columns(t) }
}
