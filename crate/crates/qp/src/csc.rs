//! Compressed sparse column storage and a triplet builder.

use crate::error::QpError;
use crate::scalar::Scalar;

/// Sparse matrix in compressed sparse column form.
///
/// Row indices within a column are strictly increasing; duplicates are
/// summed on construction from triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<T>,
}

impl<T: Scalar> CscMatrix<T> {
    pub fn new(
        nrows: usize,
        ncols: usize,
        colptr: Vec<usize>,
        rowval: Vec<usize>,
        nzval: Vec<T>,
    ) -> Result<Self, QpError> {
        if colptr.len() != ncols + 1 || colptr[0] != 0 {
            return Err(QpError::Malformed("column pointer length or origin".into()));
        }
        if rowval.len() != nzval.len() || colptr[ncols] != rowval.len() {
            return Err(QpError::Malformed("nonzero count mismatch".into()));
        }
        for j in 0..ncols {
            if colptr[j] > colptr[j + 1] {
                return Err(QpError::Malformed(format!(
                    "column pointer decreases at {j}"
                )));
            }
            let rows = &rowval[colptr[j]..colptr[j + 1]];
            if rows.iter().any(|&r| r >= nrows) {
                return Err(QpError::Malformed(format!(
                    "row index out of range in column {j}"
                )));
            }
            if rows.windows(2).any(|w| w[0] >= w[1]) {
                return Err(QpError::Malformed(format!(
                    "unsorted or duplicate rows in column {j}"
                )));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowval,
            nzval,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowval: Vec::new(),
            nzval: Vec::new(),
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            colptr: (0..=n).collect(),
            rowval: (0..n).collect(),
            nzval: diag.to_vec(),
        }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, T)],
    ) -> Result<Self, QpError> {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(QpError::Dimension(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            counts[c + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(r, c, v) in triplets {
            rows[next[c]] = r;
            vals[next[c]] = v;
            next[c] += 1;
        }
        let mut colptr = Vec::with_capacity(ncols + 1);
        let mut rowval = Vec::with_capacity(triplets.len());
        let mut nzval = Vec::with_capacity(triplets.len());
        colptr.push(0);
        let mut scratch: Vec<(usize, T)> = Vec::new();
        for j in 0..ncols {
            scratch.clear();
            scratch.extend((counts[j]..counts[j + 1]).map(|p| (rows[p], vals[p])));
            scratch.sort_by_key(|e| e.0);
            for &(r, v) in &scratch {
                if rowval.len() > colptr[j] && *rowval.last().unwrap() == r {
                    *nzval.last_mut().unwrap() += v;
                } else {
                    rowval.push(r);
                    nzval.push(v);
                }
            }
            colptr.push(rowval.len());
        }
        Ok(Self {
            nrows,
            ncols,
            colptr,
            rowval,
            nzval,
        })
    }

    pub fn nnz(&self) -> usize {
        self.rowval.len()
    }

    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.colptr[j]..self.colptr[j + 1];
        self.rowval[r.clone()]
            .iter()
            .copied()
            .zip(self.nzval[r].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let rows = &self.rowval[self.colptr[c]..self.colptr[c + 1]];
        match rows.binary_search(&r) {
            Ok(k) => self.nzval[self.colptr[c] + k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        (0..self.ncols)
            .flat_map(|j| self.col(j).map(move |(i, v)| (i, j, v)))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.rowval {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut rowval = vec![0usize; self.nnz()];
        let mut nzval = vec![T::zero(); self.nnz()];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                rowval[next[i]] = j;
                nzval[next[i]] = v;
                next[i] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr: counts,
            rowval,
            nzval,
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = T::zero());
        for (j, &xj) in x.iter().enumerate() {
            if xj == T::zero() {
                continue;
            }
            for (i, v) in self.col(j) {
                y[i] += v * xj;
            }
        }
    }

    /// `y = A' x`
    pub fn tr_mul_vec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (j, yj) in y.iter_mut().enumerate() {
            *yj = self.col(j).map(|(i, v)| v * x[i]).sum();
        }
    }

    /// `y = A x` for a symmetric `A` of which only the upper triangle is stored.
    pub fn sym_upper_mul_vec(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
    }

    pub fn is_upper_triangular(&self) -> bool {
        (0..self.ncols).all(|j| self.col(j).all(|(i, _)| i <= j))
    }

    /// Returns the diagonal if every stored entry is on it.
    pub fn diagonal_only(&self) -> Option<Vec<T>> {
        if self.nrows != self.ncols {
            return None;
        }
        let mut d = vec![T::zero(); self.ncols];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                if i != j {
                    return None;
                }
                d[j] = v;
            }
        }
        Some(d)
    }

    /// Scales in place: `A <- diag(row) * A * diag(col)`.
    pub fn scale(&mut self, row: &[T], col: &[T]) {
        for j in 0..self.ncols {
            for p in self.colptr[j]..self.colptr[j + 1] {
                self.nzval[p] = self.nzval[p] * row[self.rowval[p]] * col[j];
            }
        }
    }

    /// Infinity norms of each column.
    pub fn col_inf_norms(&self) -> Vec<T> {
        (0..self.ncols)
            .map(|j| self.col(j).fold(T::zero(), |m, (_, v)| m.max(v.abs())))
            .collect()
    }

    /// Infinity norms of each row.
    pub fn row_inf_norms(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                out[i] = out[i].max(v.abs());
            }
        }
        out
    }

    /// Column infinity norms of the full symmetric matrix whose upper triangle is stored.
    pub fn sym_upper_col_inf_norms(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.ncols];
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                out[j] = out[j].max(v.abs());
                out[i] = out[i].max(v.abs());
            }
        }
        out
    }

    /// Selects the given rows (in the order given) into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.nrows];
        for (k, &r) in rows.iter().enumerate() {
            map[r] = k;
        }
        let mut trip = Vec::new();
        for j in 0..self.ncols {
            for (i, v) in self.col(j) {
                if map[i] != usize::MAX {
                    trip.push((map[i], j, v));
                }
            }
        }
        Self::from_triplets(rows.len(), self.ncols, &trip).expect("indices are in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m =
            CscMatrix::from_triplets(3, 2, &[(2, 0, 1.0), (0, 0, 2.0), (2, 0, 3.0), (1, 1, 5.0)])
                .unwrap();
        assert_eq!(m.colptr, vec![0, 2, 3]);
        assert_eq!(m.rowval, vec![0, 2, 1]);
        assert_eq!(m.nzval, vec![2.0, 4.0, 5.0]);
        assert_eq!(m.get(2, 0), 4.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn transpose_and_products_agree() {
        let m =
            CscMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (1, 1, 2.0), (0, 2, -1.0), (1, 2, 4.0)])
                .unwrap();
        let x = [1.0, 2.0, 3.0];
        let mut y = [0.0; 2];
        m.mul_vec(&x, &mut y);
        assert_eq!(y, [-2.0, 16.0]);
        let t = m.transpose();
        let mut back = [0.0; 3];
        m.tr_mul_vec(&y, &mut back);
        let mut back2 = [0.0; 3];
        t.mul_vec(&y, &mut back2);
        assert_eq!(back, back2);
    }

    #[test]
    fn symmetric_upper_product() {
        // [[2, 1], [1, 3]]
        let p = CscMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 1, 3.0)]).unwrap();
        let mut y = [0.0; 2];
        p.sym_upper_mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, [3.0, 4.0]);
        assert!(p.is_upper_triangular());
        assert!(p.diagonal_only().is_none());
    }

    #[test]
    fn rejects_bad_structure() {
        assert!(CscMatrix::<f64>::new(2, 1, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(CscMatrix::<f64>::new(2, 1, vec![0, 1], vec![5], vec![1.0]).is_err());
        assert!(CscMatrix::<f64>::from_triplets(1, 1, &[(1, 0, 1.0)]).is_err());
    }
}
