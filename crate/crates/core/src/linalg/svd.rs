//! Dense SVD of small matrices by one-sided (Hestenes) Jacobi rotations.
//!
//! The solver only ever decomposes `(r + k) × (r + k)` cores, where a cubic
//! method is cheap. One-sided Jacobi is used because it delivers small
//! singular values to high relative accuracy and its orthogonality test is
//! scale-invariant.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// Thin SVD `T = M · diag(s) · Nᵀ` of a `p × q` matrix.
///
/// `M` is `p × min(p, q)`, `N` is `q × min(p, q)`, both with orthonormal
/// columns; `s` is non-negative and non-increasing.
pub fn small_svd<T: Scalar>(t: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Vec<T>, DenseMatrix<T>)> {
    if !t.is_finite() {
        return Err(Error::invalid("small_svd input has non-finite entries"));
    }
    let (p, q) = t.shape();
    if p == 0 || q == 0 {
        return Ok((DenseMatrix::zeros(p, 0), Vec::new(), DenseMatrix::zeros(q, 0)));
    }
    if p >= q {
        jacobi_tall(t)
    } else {
        let (n, s, m) = jacobi_tall(&t.transpose())?;
        Ok((m, s, n))
    }
}

fn jacobi_tall<T: Scalar>(a: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, Vec<T>, DenseMatrix<T>)> {
    let (p, q) = a.shape();
    let mut cols: Vec<Vec<T>> = (0..q).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<T>> = (0..q)
        .map(|j| {
            let mut e = vec![T::zero(); q];
            e[j] = T::one();
            e
        })
        .collect();
    let tol = T::epsilon() * T::from_usize_lossy(p);
    // Columns below ε·‖A‖_F are roundoff; rotating them against large
    // columns cannot reach relative orthogonality.
    let frob_sq = a.as_slice().iter().map(|&x| x * x).sum::<T>();
    let floor = T::epsilon() * T::epsilon() * frob_sq;

    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for i in 0..q {
            for j in (i + 1)..q {
                let (left, right) = cols.split_at_mut(j);
                let (ci, cj) = (&mut left[i], &mut right[0]);
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = T::zero();
                for (&x, &y) in ci.iter().zip(cj.iter()) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == T::zero() || alpha <= floor || beta <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let tan = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let cos = T::one() / (T::one() + tan * tan).sqrt();
                let sin = cos * tan;
                rotate(ci, cj, cos, sin);
                let (vl, vr) = vcols.split_at_mut(j);
                rotate(&mut vl[i], &mut vr[0], cos, sin);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(
            "small_svd",
            format!("one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps on a {p}x{q} input"),
        ));
    }

    let norms: Vec<T> = cols.iter().map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt()).collect();
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));

    let smax = norms[order[0]];
    let negligible = smax * T::epsilon() * T::from_usize_lossy(p.max(q));
    let mut s = Vec::with_capacity(q);
    let mut ucols: Vec<Vec<T>> = Vec::with_capacity(q);
    let mut pending = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        if norms[j] > negligible && norms[j] > T::zero() {
            let inv = T::one() / norms[j];
            ucols.push(cols[j].iter().map(|&x| x * inv).collect());
        } else {
            ucols.push(Vec::new());
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut ucols, &pending, p);

    let m = DenseMatrix::from_columns(p, &ucols);
    let nvecs: Vec<Vec<T>> = order.iter().map(|&j| vcols[j].clone()).collect();
    let n = DenseMatrix::from_columns(q, &nvecs);
    Ok((m, s, n))
}

#[inline]
fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], cos: T, sin: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = cos * xa - sin * yb;
        *b = sin * xa + cos * yb;
    }
}

/// Fills the listed slots with unit vectors orthogonal to every other column.
fn complete_orthonormal<T: Scalar>(cols: &mut [Vec<T>], pending: &[usize], dim: usize) {
    let mut candidate = 0;
    for &slot in pending {
        loop {
            assert!(candidate < dim, "cannot complete an orthonormal basis");
            let mut v = vec![T::zero(); dim];
            v[candidate] = T::one();
            candidate += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || c.is_empty() {
                        continue;
                    }
                    let d = c.iter().zip(&v).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                    for (x, &ci) in v.iter_mut().zip(c) {
                        *x -= d * ci;
                    }
                }
            }
            let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
            if norm > T::lit(0.5) {
                cols[slot] = v.into_iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn reconstruct(m: &DenseMatrix<f64>, s: &[f64], n: &DenseMatrix<f64>) -> DenseMatrix<f64> {
        m.scale_columns(s).matmul_transpose(n)
    }

    /// Cyclic Jacobi eigenvalue iteration on a symmetric matrix. Independent of
    /// the one-sided routine under test.
    fn symmetric_eigenvalues(a: &DenseMatrix<f64>) -> Vec<f64> {
        let n = a.rows();
        let mut a = a.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off += a[(i, j)] * a[(i, j)];
                    }
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
        ev
    }

    #[test]
    fn diagonal_input() {
        let t = DenseMatrix::from_rows(&[[2.0f64, 0.0], [0.0, 1.0]]);
        let (m, s, n) = small_svd(&t).unwrap();
        assert_eq!(s, vec![2.0, 1.0]);
        assert!(m.sub(&DenseMatrix::identity(2)).max_abs() < 1e-15);
        assert!(n.sub(&DenseMatrix::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn permutation_has_unit_singular_values() {
        let t = DenseMatrix::from_rows(&[[0.0f64, 1.0], [1.0, 0.0]]);
        let (m, s, n) = small_svd(&t).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);
        assert!(reconstruct(&m, &s, &n).sub(&t).max_abs() < 1e-15);
    }

    #[test]
    fn random_8x8_against_eigen_oracle() {
        let t = random(8, 8, 11);
        let (m, s, n) = small_svd(&t).unwrap();
        let err = reconstruct(&m, &s, &n).sub(&t).frobenius_norm() / t.frobenius_norm();
        assert!(err <= 1e-10, "reconstruction {err}");
        assert!(m.orthonormality_error() < 1e-12 && n.orthonormality_error() < 1e-12);
        let ev = symmetric_eigenvalues(&t.transpose_matmul(&t));
        for (si, ei) in s.iter().zip(&ev) {
            assert!((si - ei.max(0.0).sqrt()).abs() <= 1e-8, "{si} vs {}", ei.sqrt());
        }
    }

    #[test]
    fn rank_deficient_and_zero_inputs() {
        let u = random(6, 1, 2);
        let v = random(4, 1, 3);
        let t = u.matmul_transpose(&v);
        let (m, s, n) = small_svd(&t).unwrap();
        assert_eq!(m.shape(), (6, 4));
        assert!(m.orthonormality_error() < 1e-12);
        assert!(n.orthonormality_error() < 1e-12);
        assert!(s[1] < 1e-14 * s[0]);
        assert!(reconstruct(&m, &s, &n).sub(&t).max_abs() < 1e-14);

        let z = DenseMatrix::<f64>::zeros(3, 2);
        let (m, s, n) = small_svd(&z).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
        assert!(m.orthonormality_error() < 1e-15 && n.orthonormality_error() < 1e-15);
    }

    #[test]
    fn wide_input() {
        let t = random(3, 7, 4);
        let (m, s, n) = small_svd(&t).unwrap();
        assert_eq!((m.shape(), n.shape(), s.len()), ((3, 3), (7, 3), 3));
        assert!(reconstruct(&m, &s, &n).sub(&t).frobenius_norm() < 1e-12);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn rejects_nan() {
        let mut t = random(2, 2, 1);
        t[(0, 1)] = f64::NAN;
        assert!(small_svd(&t).is_err());
    }

    fn random_orthogonal(n: usize, seed: u64) -> DenseMatrix<f64> {
        crate::linalg::reduced_qr(&random(n, n, seed)).unwrap().0
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn singular_values_invariant_under_rotations(p in 1usize..10, q in 1usize..10, seed in any::<u64>()) {
            let t = random(p, q, seed);
            let (_, s, _) = small_svd(&t).unwrap();
            let rotated = random_orthogonal(p, seed ^ 1).matmul(&t).matmul(&random_orthogonal(q, seed ^ 2));
            let (_, s2, _) = small_svd(&rotated).unwrap();
            for (a, b) in s.iter().zip(&s2) {
                prop_assert!((a - b).abs() <= 1e-8);
            }
        }

        #[test]
        fn reconstruction_property(p in 1usize..16, q in 1usize..16, seed in any::<u64>()) {
            let t = random(p, q, seed);
            let (m, s, n) = small_svd(&t).unwrap();
            prop_assert!(reconstruct(&m, &s, &n).sub(&t).frobenius_norm() <= 1e-10 * t.frobenius_norm());
            prop_assert!(m.orthonormality_error() <= 1e-10);
            prop_assert!(n.orthonormality_error() <= 1e-10);
            prop_assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|&x| x >= 0.0));
        }
    }
}
