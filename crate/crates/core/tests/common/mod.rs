#![allow(dead_code)]

use nalgebra::DMatrix;
use nnssgd::data::{DuplicatePolicy, SparseObservations};
use nnssgd::linalg::{CompactSvd, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng))
}

pub fn to_na(a: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

pub fn from_na(a: &DMatrix<f64>) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Singular values sorted in decreasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn nuclear_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).iter().sum()
}

/// Best rank-`t` approximation with numerically zero values dropped, then
/// scaled into the Frobenius ball of radius `delta`.
///
/// Built as `P·A` where `P` projects onto the leading eigenvectors of `A·Aᵀ`.
/// The full nalgebra SVD occasionally returns inconsistent factors for
/// exactly rank-deficient input, while the symmetric eigensolver does not.
pub fn dense_truncate_project(a: &DMatrix<f64>, t: usize, delta: f64) -> DMatrix<f64> {
    let m = a.nrows();
    let eig = (a * a.transpose()).symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let top = order.first().map(|&l| eig.eigenvalues[l].max(0.0)).unwrap_or(0.0);
    let kept: Vec<_> = order
        .iter()
        .take(t)
        .filter(|&&l| eig.eigenvalues[l] > 1e-12 * top && eig.eigenvalues[l] > 0.0)
        .map(|&l| eig.eigenvectors.column(l).into_owned())
        .collect();
    if kept.is_empty() {
        return DMatrix::zeros(m, a.ncols());
    }
    let u = DMatrix::from_columns(&kept);
    let mut out = &u * (u.transpose() * a);
    let norm = out.norm();
    if norm > delta {
        out *= delta / norm;
    }
    out
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// A random compact SVD of exact rank `p` with well separated values.
pub fn random_compact(rng: &mut ChaCha8Rng, m: usize, n: usize, p: usize) -> CompactSvd<f64> {
    if p == 0 {
        return CompactSvd::zero(m, n);
    }
    let a = gaussian(rng, m, p);
    let b = gaussian(rng, n, p);
    let (qa, _) = nnssgd::linalg::reduced_qr(&a).unwrap();
    let (qb, _) = nnssgd::linalg::reduced_qr(&b).unwrap();
    let mut sigma: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..3.0)).collect();
    sigma.sort_by(|x, y| y.total_cmp(x));
    CompactSvd::from_parts(qa, sigma, qb).unwrap()
}

pub fn random_sparse(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseObservations<f64> {
    let mut trip = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.random_bool(density) {
                trip.push((i, j, StandardNormal.sample(rng)));
            }
        }
    }
    SparseObservations::from_triplets(m, n, trip, DuplicatePolicy::Reject).unwrap()
}

pub fn full_observations(z: &DenseMatrix<f64>) -> SparseObservations<f64> {
    let trip = (0..z.rows()).flat_map(|i| (0..z.cols()).map(move |j| (i, j))).map(|(i, j)| (i, j, z[(i, j)]));
    SparseObservations::from_triplets(z.rows(), z.cols(), trip, DuplicatePolicy::Reject).unwrap()
}
