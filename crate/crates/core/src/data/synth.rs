//! Random low-rank completion problems with a known answer.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{DuplicatePolicy, SparseObservations};
use crate::error::{Error, Result};
use crate::linalg::{reduced_qr, small_svd, CompactSvd, DenseMatrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct SyntheticProblem<T> {
    pub train: SparseObservations<T>,
    pub test: SparseObservations<T>,
    pub truth: CompactSvd<T>,
}

/// Ground truth `A·Bᵀ` with standard normal factors, rescaled so the mean
/// squared entry is 1. A uniform sample of `⌈density·m·n⌉` cells is observed
/// with additive Gaussian noise; one fifth (rounded down) of the sample is
/// held out as the test set.
pub fn gen_synthetic<T: Scalar>(
    m: usize,
    n: usize,
    rank: usize,
    density: f64,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticProblem<T>> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("dimensions must be positive"));
    }
    if rank == 0 || rank > m.min(n) {
        return Err(Error::invalid(format!("rank {rank} outside 1..={}", m.min(n))));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::invalid(format!("density {density} outside (0, 1]")));
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(Error::invalid(format!("noise std {noise_std} must be finite and non-negative")));
    }
    let cells = m.checked_mul(n).ok_or_else(|| Error::invalid("m*n overflows"))?;
    let count = ((density * cells as f64).ceil() as usize).min(cells);
    if count < 10 {
        return Err(Error::invalid(format!("only {count} observed cells; need at least 10 to split train/test")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> T {
        let x: f64 = StandardNormal.sample(&mut rng);
        T::lit(x)
    };
    let a = DenseMatrix::from_fn(m, rank, |_, _| normal());
    let b = DenseMatrix::from_fn(n, rank, |_, _| normal());

    // A·Bᵀ = Qa·(Ra·Rbᵀ)·Qbᵀ, and the small core carries the singular values.
    let (qa, ra) = reduced_qr(&a)?;
    let (qb, rb) = reduced_qr(&b)?;
    let (mm, sigma, nn) = small_svd(&ra.matmul_transpose(&rb))?;
    let fro = sigma.iter().map(|&s| s * s).sum::<T>().sqrt();
    if !(fro > T::zero()) {
        return Err(Error::numerical("gen_synthetic", "random factors produced a zero matrix"));
    }
    let scale = T::from_usize_lossy(cells).sqrt() / fro;
    let sigma: Vec<T> = sigma.iter().map(|&s| s * scale).collect();
    let truth = CompactSvd::from_parts(qa.matmul(&mm), sigma, qb.matmul(&nn))?;

    let picked = index::sample(&mut rng, cells, count).into_vec();
    let n_test = count / 5;
    let mut test = Vec::with_capacity(n_test);
    let mut train = Vec::with_capacity(count - n_test);
    for (pos, cell) in picked.into_iter().enumerate() {
        let (i, j) = (cell / n, cell % n);
        let mut v = truth.entry(i, j);
        if noise_std > 0.0 {
            let e: f64 = StandardNormal.sample(&mut rng);
            v += T::lit(noise_std * e);
        }
        if pos < n_test {
            test.push((i, j, v));
        } else {
            train.push((i, j, v));
        }
    }
    Ok(SyntheticProblem {
        train: SparseObservations::from_triplets(m, n, train, DuplicatePolicy::Reject)?,
        test: SparseObservations::from_triplets(m, n, test, DuplicatePolicy::Reject)?,
        truth,
    })
}
