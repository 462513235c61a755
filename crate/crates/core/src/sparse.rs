//! Compressed sparse row storage and the handful of products the solvers need.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

/// Sparse matrix in CSR layout. Within each row the column indices are
/// strictly increasing; values are finite. Stored zeros are permitted (they
/// can arrive from files or from duplicate summation) and only matter to the
/// numeric zero-row/column analysis in [`SparseMatrixCSR::compact`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrixCSR {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrixCSR {
    /// Assembles from (row, col, value) triplets. Duplicate coordinates are
    /// summed; rows come out sorted by column.
    pub fn from_coordinates(
        triplets: &[(usize, usize, f64)],
        m: usize,
        n: usize,
    ) -> Result<SparseMatrixCSR> {
        for &(i, j, v) in triplets {
            if i >= m || j >= n {
                return Err(Error::IndexOutOfRange(format!(
                    "triplet ({i},{j}) outside {m}x{n}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Precondition(format!(
                    "non-finite value {v} at ({i},{j})"
                )));
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; m + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..m {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(SparseMatrixCSR {
            nrows: m,
            ncols: n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> SparseMatrixCSR {
        let triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        SparseMatrixCSR::from_coordinates(&triplets, n, n).unwrap()
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries of row `i` as (column, value) pairs, column-ascending.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row_entries(i) {
                out.push((i, j, v));
            }
        }
        out
    }

    /// y = A x, accumulated in stored row order.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch(format!(
                "matvec: x has length {}, matrix has {} columns",
                x.len(),
                self.ncols
            )));
        }
        let mut y = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[idx] * x[self.col_idx[idx]];
            }
            y[i] = acc;
        }
        Ok(y)
    }

    /// y = Aᵀ x without materializing the transpose.
    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch(format!(
                "matvec_transpose: x has length {}, matrix has {} rows",
                x.len(),
                self.nrows
            )));
        }
        let mut y = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[idx]] += self.values[idx] * xi;
            }
        }
        Ok(y)
    }

    /// Entry j holds ‖a_j‖₂², the squared Euclidean norm of column j.
    pub fn column_sq_norms(&self) -> Vec<f64> {
        let mut norms = vec![0.0; self.ncols];
        for idx in 0..self.values.len() {
            norms[self.col_idx[idx]] += self.values[idx] * self.values[idx];
        }
        norms
    }

    pub fn transpose(&self) -> SparseMatrixCSR {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut cursor = counts;
        for i in 0..self.nrows {
            for (j, v) in self.row_entries(i) {
                let dst = cursor[j];
                col_idx[dst] = i;
                values[dst] = v;
                cursor[j] += 1;
            }
        }
        SparseMatrixCSR {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Drops numerically zero rows and columns. Returns the compacted matrix
    /// plus maps from new indices back to the original ones.
    pub fn compact(&self) -> Result<(SparseMatrixCSR, Vec<usize>, Vec<usize>)> {
        let mut row_live = vec![false; self.nrows];
        let mut col_live = vec![false; self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row_entries(i) {
                if v != 0.0 {
                    row_live[i] = true;
                    col_live[j] = true;
                }
            }
        }
        if !row_live.iter().any(|&x| x) {
            return Err(Error::DegenerateInput(
                "compact: matrix has no nonzero entries".into(),
            ));
        }
        let row_map: Vec<usize> = (0..self.nrows).filter(|&i| row_live[i]).collect();
        let col_map: Vec<usize> = (0..self.ncols).filter(|&j| col_live[j]).collect();
        let mut new_col = vec![usize::MAX; self.ncols];
        for (new, &old) in col_map.iter().enumerate() {
            new_col[old] = new;
        }
        let mut triplets = Vec::with_capacity(self.nnz());
        for (new_i, &old_i) in row_map.iter().enumerate() {
            for (j, v) in self.row_entries(old_i) {
                if v != 0.0 {
                    triplets.push((new_i, new_col[j], v));
                }
            }
        }
        let compacted =
            SparseMatrixCSR::from_coordinates(&triplets, row_map.len(), col_map.len())?;
        Ok((compacted, row_map, col_map))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row_entries(i) {
                d.set(i, j, d.get(i, j) + v);
            }
        }
        d
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
