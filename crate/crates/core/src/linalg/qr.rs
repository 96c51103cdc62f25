//! Householder QR for tall-skinny matrices.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Reduced QR factorization `A = Q·R` of an `m × p` matrix with `m ≥ p`.
///
/// `Q` is `m × p` with orthonormal columns and `R` is `p × p` upper triangular
/// with a non-negative diagonal.
pub fn reduced_qr<T: Scalar>(a: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let (m, p) = a.shape();
    if p == 0 || m < p {
        return Err(Error::invalid(format!("reduced_qr needs m >= p >= 1, got {m}x{p}")));
    }
    if !a.is_finite() {
        return Err(Error::invalid("reduced_qr input has non-finite entries"));
    }
    Ok(thin_qr(a))
}

/// Thin QR of an arbitrary `m × c` matrix: `Q` is `m × q`, `R` is `q × c`
/// upper trapezoidal, with `q = min(m, c)`. Diagonal of `R` is non-negative.
///
/// The caller guarantees finite input.
pub(crate) fn thin_qr<T: Scalar>(a: &DenseMatrix<T>) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let (m, c) = a.shape();
    let q = m.min(c);

    // Column-major working copy; reflector j lives in rows j.. of column j.
    let mut w = vec![T::zero(); m * c];
    for i in 0..m {
        for (j, &x) in a.row(i).iter().enumerate() {
            w[j * m + i] = x;
        }
    }
    let mut tau = vec![T::zero(); q];
    let mut diag = vec![T::zero(); q];

    for j in 0..q {
        let (head, tail) = w.split_at_mut((j + 1) * m);
        let v = &mut head[j * m + j..];
        let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm == T::zero() {
            continue;
        }
        let x0 = v[0];
        let alpha = if x0 >= T::zero() { -norm } else { norm };
        v[0] = x0 - alpha;
        let vtv = v.iter().map(|&x| x * x).sum::<T>();
        if vtv == T::zero() {
            diag[j] = alpha;
            continue;
        }
        let t = T::lit(2.0) / vtv;
        tau[j] = t;
        diag[j] = alpha;
        for k in 0..(c - j - 1) {
            let col = &mut tail[k * m + j..(k + 1) * m];
            let s = v.iter().zip(col.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b) * t;
            if s != T::zero() {
                for (x, &vi) in col.iter_mut().zip(v.iter()) {
                    *x -= s * vi;
                }
            }
        }
    }

    let mut r = DenseMatrix::zeros(q, c);
    for i in 0..q {
        r[(i, i)] = diag[i];
        for k in (i + 1)..c {
            r[(i, k)] = w[k * m + i];
        }
    }

    // Accumulate Q = H_0 … H_{q-1} [I_q; 0] in column-major order.
    let mut qw = vec![T::zero(); m * q];
    for j in 0..q {
        qw[j * m + j] = T::one();
    }
    for j in (0..q).rev() {
        let t = tau[j];
        if t == T::zero() {
            continue;
        }
        let v = &w[j * m + j..(j + 1) * m];
        for k in j..q {
            let col = &mut qw[k * m + j..(k + 1) * m];
            let s = v.iter().zip(col.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b) * t;
            if s != T::zero() {
                for (x, &vi) in col.iter_mut().zip(v) {
                    *x -= s * vi;
                }
            }
        }
    }

    let mut qm = DenseMatrix::zeros(m, q);
    for i in 0..m {
        let row = qm.row_mut(i);
        for (j, x) in row.iter_mut().enumerate() {
            *x = qw[j * m + i];
        }
    }

    for j in 0..q {
        if r[(j, j)] < T::zero() {
            for k in j..c {
                r[(j, k)] = -r[(j, k)];
            }
            for i in 0..m {
                qm[(i, j)] = -qm[(i, j)];
            }
        }
    }
    (qm, r)
}
