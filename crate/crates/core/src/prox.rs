//! Dense proximal-gradient solver for
//! `min_X α‖P_Ω(X) − Z‖_F² + β‖X‖_*`, used as a reference on small problems.

use crate::data::SparseObservations;
use crate::error::{Error, Result};
use crate::linalg::{small_svd, DenseMatrix};
use crate::scalar::Scalar;

const MAX_ITERATIONS: usize = 100_000;

/// Soft-thresholds the singular values of `x` by `tau`.
pub fn singular_value_threshold<T: Scalar>(x: &DenseMatrix<T>, tau: T) -> Result<DenseMatrix<T>> {
    let (u, s, v) = small_svd(x)?;
    let shrunk: Vec<T> = s.iter().map(|&v| (v - tau).max(T::zero())).collect();
    let keep = shrunk.iter().take_while(|&&v| v > T::zero()).count();
    if keep == 0 {
        return Ok(DenseMatrix::zeros(x.rows(), x.cols()));
    }
    let us = u.leading_columns(keep).scale_columns(&shrunk[..keep]);
    Ok(us.matmul_transpose(&v.leading_columns(keep)))
}

/// Fully observed problem: the minimizer is `SVT_{β/2α}(Z)`, reached by the
/// first gradient step; the loop only confirms it.
pub fn prox_reference_solver<T: Scalar>(z: &DenseMatrix<T>, alpha: T, beta: T, tol: T) -> Result<DenseMatrix<T>> {
    let (m, n) = z.shape();
    let mut trip = Vec::with_capacity(m * n);
    for i in 0..m {
        for (j, &v) in z.row(i).iter().enumerate() {
            trip.push((i, j, v));
        }
    }
    let obs = SparseObservations::from_triplets(m, n, trip, Default::default())?;
    prox_reference_solver_masked(&obs, alpha, beta, tol)
}

/// `X ← SVT_{β/2α}(X − (P_Ω(X) − Z))`, the proximal-gradient step with step
/// `1/(2α)`, until the relative objective change drops below `tol`.
pub fn prox_reference_solver_masked<T: Scalar>(z: &SparseObservations<T>, alpha: T, beta: T, tol: T) -> Result<DenseMatrix<T>> {
    if !(alpha > T::zero()) || !(beta >= T::zero()) || !(tol > T::zero()) {
        return Err(Error::invalid("prox solver needs alpha > 0, beta >= 0 and tol > 0"));
    }
    let (m, n) = (z.nrows(), z.ncols());
    if m.max(n) > 200 {
        return Err(Error::invalid(format!("{m}x{n} is too large for the dense reference solver")));
    }
    let tau = beta / (T::lit(2.0) * alpha);
    let mut x = DenseMatrix::zeros(m, n);
    let mut prev = prox_objective(&x, z, alpha, beta)?;
    for _ in 0..MAX_ITERATIONS {
        let mut step = x.clone();
        for (i, j, v) in z.iter() {
            step[(i, j)] = v;
        }
        x = singular_value_threshold(&step, tau)?;
        let f = prox_objective(&x, z, alpha, beta)?;
        let change = (prev - f).abs();
        if change == T::zero() || change < tol * prev.abs().max(T::min_positive_value()) {
            return Ok(x);
        }
        prev = f;
    }
    Err(Error::numerical(
        "prox_reference_solver",
        format!("no convergence to relative tolerance {tol} within {MAX_ITERATIONS} iterations"),
    ))
}

/// `α‖P_Ω(X) − Z‖_F² + β‖X‖_*` for a dense `X`.
pub fn prox_objective<T: Scalar>(x: &DenseMatrix<T>, z: &SparseObservations<T>, alpha: T, beta: T) -> Result<T> {
    let fit: T = z.iter().map(|(i, j, v)| (x[(i, j)] - v) * (x[(i, j)] - v)).sum();
    let nuclear = if beta == T::zero() { T::zero() } else { small_svd(x)?.1.into_iter().sum() };
    Ok(alpha * fit + beta * nuclear)
}
