use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// What to do when the same `(row, col)` cell appears more than once.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DuplicatePolicy {
    /// Duplicates are a data error.
    #[default]
    Reject,
    /// The last occurrence in input order is kept.
    LastWins,
}

/// Observed entries `Ω` of an `m × n` grid with their values.
///
/// Doubles as the matrix `Z` that is zero off `Ω`. Storage is compressed by
/// column (entries of a column sorted by row) with a secondary row index.
/// Indices are zero-based.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseObservations<T> {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<T>,
    row_ptr: Vec<usize>,
    row_order: Vec<usize>,
}

impl<T: Scalar> SparseObservations<T> {
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I, policy: DuplicatePolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, T)>,
    {
        if nrows == 0 || ncols == 0 {
            return Err(Error::invalid(format!("grid dimensions must be positive, got {nrows}x{ncols}")));
        }
        let mut entries: Vec<(usize, usize, T)> = triplets.into_iter().collect();
        for &(i, j, v) in &entries {
            if i >= nrows || j >= ncols {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside {nrows}x{ncols} grid")));
            }
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite value at ({i}, {j})")));
            }
        }
        // Stable sort keeps input order among duplicates.
        entries.sort_by_key(|&(i, j, _)| (j, i));
        let mut dedup: Vec<(usize, usize, T)> = Vec::with_capacity(entries.len());
        for e in entries {
            match dedup.last_mut() {
                Some(last) if last.0 == e.0 && last.1 == e.1 => match policy {
                    DuplicatePolicy::Reject => {
                        return Err(Error::Data(format!("duplicate entry at ({}, {})", e.0, e.1)));
                    }
                    DuplicatePolicy::LastWins => *last = e,
                },
                _ => dedup.push(e),
            }
        }

        let mut col_ptr = vec![0usize; ncols + 1];
        for &(_, j, _) in &dedup {
            col_ptr[j + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let row_idx: Vec<usize> = dedup.iter().map(|e| e.0).collect();
        let values: Vec<T> = dedup.iter().map(|e| e.2).collect();

        let mut row_ptr = vec![0usize; nrows + 1];
        for &i in &row_idx {
            row_ptr[i + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut fill = row_ptr.clone();
        let mut row_order = vec![0usize; row_idx.len()];
        // Walking columns in order leaves each row's slots sorted by column.
        for (pos, &i) in row_idx.iter().enumerate() {
            row_order[fill[i]] = pos;
            fill[i] += 1;
        }

        Ok(Self { nrows, ncols, col_ptr, row_idx, values, row_ptr, row_order })
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row indices and values of column `j`, sorted by row.
    #[inline]
    pub fn column(&self, j: usize) -> (&[usize], &[T]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    /// `(col, value)` pairs of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        self.row_order[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(move |&pos| {
            let j = self.col_ptr.partition_point(|&start| start <= pos) - 1;
            (j, self.values[pos])
        })
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn col_len(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    /// Value at `(i, j)` if observed.
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        let (rows, vals) = self.column(j);
        rows.binary_search(&i).ok().map(|k| vals[k])
    }

    /// All entries as `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.ncols).flat_map(move |j| {
            let (rows, vals) = self.column(j);
            rows.iter().zip(vals).map(move |(&i, &v)| (i, j, v))
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// `‖Z‖_F²` over the observed entries.
    pub fn frobenius_norm_sq(&self) -> T {
        self.values.iter().map(|&v| v * v).sum()
    }

    /// Same pattern, values replaced by `f(row, col, value)`.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, T) -> T) -> Self {
        let mut out = self.clone();
        for j in 0..self.ncols {
            for pos in self.col_ptr[j]..self.col_ptr[j + 1] {
                out.values[pos] = f(self.row_idx[pos], j, self.values[pos]);
            }
        }
        out
    }

    /// `Z x` for a dense vector `x` of length `n`.
    pub fn mul_vec_into(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (j, &xj) in x.iter().enumerate() {
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                out[i] += v * xj;
            }
        }
    }

    /// `Z · B` for a dense `n × c` matrix.
    pub fn mul_dense(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(b.rows(), self.ncols);
        let mut out = DenseMatrix::zeros(self.nrows, b.cols());
        for j in 0..self.ncols {
            let brow = b.row(j);
            let (rows, vals) = self.column(j);
            for (&i, &v) in rows.iter().zip(vals) {
                for (o, &x) in out.row_mut(i).iter_mut().zip(brow) {
                    *o += v * x;
                }
            }
        }
        out
    }

    /// `Zᵀ · B` for a dense `m × c` matrix.
    pub fn transpose_mul_dense(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(b.rows(), self.nrows);
        let mut out = DenseMatrix::zeros(self.ncols, b.cols());
        for j in 0..self.ncols {
            let (rows, vals) = self.column(j);
            let orow = out.row_mut(j);
            for (&i, &v) in rows.iter().zip(vals) {
                for (o, &x) in orow.iter_mut().zip(b.row(i)) {
                    *o += v * x;
                }
            }
        }
        out
    }

    /// Dense `m × n` matrix with zeros off `Ω`.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            out[(i, j)] = v;
        }
        out
    }
}
