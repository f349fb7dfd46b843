//! Compressed sparse row storage with a row-parallel matvec.

use rayon::prelude::*;

use crate::scalar::Real;

/// Rows shorter than this are processed serially; the parallel split only
/// pays off on dataset-scale operators.
const PAR_MIN_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds from raw CSR arrays. Column indices within a row must be sorted.
    pub fn from_raw(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        assert_eq!(indptr.len(), rows + 1);
        assert_eq!(indices.len(), values.len());
        assert_eq!(*indptr.last().unwrap(), indices.len());
        debug_assert!(indices.iter().all(|&c| c < cols));
        Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// `out = self * x`. Each output entry sums its row in storage order, so
    /// the result does not depend on the thread count.
    pub fn matvec_into(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        let row_dot = |r: usize| {
            let (idx, val) = self.row(r);
            idx.iter()
                .zip(val)
                .fold(T::zero(), |acc, (&c, &v)| acc + v * x[c])
        };
        if self.rows >= PAR_MIN_ROWS {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(r, o)| *o = row_dot(r));
        } else {
            for (r, o) in out.iter_mut().enumerate() {
                *o = row_dot(r);
            }
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        self.matvec_into(x, &mut out);
        out
    }

    /// Scales every stored value: `v(r, c) *= row_scale[r] * col_scale[c]`.
    pub fn scaled(&self, row_scale: &[T], col_scale: &[T]) -> Self {
        let mut values = self.values.clone();
        for r in 0..self.rows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                values[p] = values[p] * row_scale[r] * col_scale[self.indices[p]];
            }
        }
        Self {
            values,
            ..self.clone()
        }
    }
}
