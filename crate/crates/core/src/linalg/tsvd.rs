//! Truncated SVD of a sparse observation matrix by randomized subspace
//! iteration.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::SparseObservations;
use crate::error::{Error, Result};
use crate::linalg::{qr::thin_qr, small_svd, CompactSvd, DenseMatrix};
use crate::scalar::Scalar;

/// Tuning knobs for [`tsvd_sparse_with`].
#[derive(Clone, Debug)]
pub struct TsvdOptions {
    /// Extra sketch columns beyond the target rank.
    pub oversampling: usize,
    /// Power iterations always performed before the first convergence check.
    pub min_power_iters: usize,
    /// Hard cap on power iterations.
    pub max_power_iters: usize,
    /// Stop once `max_i ‖Z vᵢ − σᵢ uᵢ‖ ≤ tol · σ₁` over the kept triplets.
    pub tol: f64,
    /// Seed of the Gaussian starting block.
    pub seed: u64,
}

impl Default for TsvdOptions {
    fn default() -> Self {
        Self { oversampling: 10, min_power_iters: 4, max_power_iters: 1000, tol: 1e-8, seed: 0x7d5f_0b3a_91c2_e6a4 }
    }
}

/// Best rank-`≤ t` approximation of the zero-filled sparse matrix.
pub fn tsvd_sparse<T: Scalar>(z: &SparseObservations<T>, t: usize) -> Result<CompactSvd<T>> {
    tsvd_sparse_with(z, t, &TsvdOptions::default())
}

pub fn tsvd_sparse_with<T: Scalar>(z: &SparseObservations<T>, t: usize, opts: &TsvdOptions) -> Result<CompactSvd<T>> {
    let (m, n) = (z.nrows(), z.ncols());
    let min_dim = m.min(n);
    if t == 0 || t > min_dim {
        return Err(Error::invalid(format!("target rank {t} outside 1..={min_dim}")));
    }
    if z.values().iter().all(|&v| v == T::zero()) {
        return Ok(CompactSvd::zero(m, n));
    }
    let width = (t + opts.oversampling).min(min_dim);
    let tol = T::lit(opts.tol);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let omega = DenseMatrix::from_fn(n, width, |_, _| {
        let x: f64 = StandardNormal.sample(&mut rng);
        T::lit(x)
    });
    let (mut q, _) = thin_qr(&z.mul_dense(&omega));

    let mut iters = 0;
    let mut last_residual = T::infinity();
    loop {
        let (qn, _) = thin_qr(&z.transpose_mul_dense(&q));
        let (qm, _) = thin_qr(&z.mul_dense(&qn));
        q = qm;
        iters += 1;

        if iters >= opts.min_power_iters {
            // Zᵀ Q = Ṽ Σ Ũᵀ, hence Qᵀ Z = Ũ Σ Ṽᵀ and Z ≈ (Q Ũ) Σ Ṽᵀ.
            let bt = z.transpose_mul_dense(&q);
            let (vt, sigma, ut) = small_svd(&bt)?;
            let keep = t.min(sigma.len());
            let u = q.matmul(&ut).leading_columns(keep);
            let v = vt.leading_columns(keep);
            let sigma: Vec<T> = sigma[..keep].to_vec();

            let s1 = sigma[0];
            if s1 == T::zero() {
                return Ok(CompactSvd::zero(m, n));
            }
            let zv = z.mul_dense(&v);
            let mut residual = T::zero();
            for l in 0..keep {
                let mut acc = T::zero();
                for i in 0..m {
                    let d = zv[(i, l)] - sigma[l] * u[(i, l)];
                    acc += d * d;
                }
                residual = residual.max(acc.sqrt() / s1);
            }
            last_residual = residual;
            if residual <= tol {
                return Ok(CompactSvd::from_thin(u, sigma, v));
            }
        }
        if iters >= opts.max_power_iters {
            return Err(Error::numerical(
                "tsvd_sparse",
                format!(
                    "subspace iteration stalled after {iters} power iterations: relative residual {} > tol {} (m={m}, n={n}, t={t}, sketch width {width})",
                    last_residual, opts.tol
                ),
            ));
        }
    }
}
