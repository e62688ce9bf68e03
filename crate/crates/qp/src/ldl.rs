//! Sparse LDL' factorization for quasi-definite symmetric matrices.
//!
//! Up-looking factorization over the elimination tree, no pivoting. The
//! input is the upper triangle (diagonal included) in CSC form. A fill-reducing
//! symmetric permutation from approximate minimum degree is applied first.

use crate::csc::CscMatrix;
use crate::error::QpError;
use crate::scalar::Scalar;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Natural,
    Amd,
}

#[derive(Debug, Clone)]
pub struct LdlFactor<T> {
    n: usize,
    perm: Vec<usize>,
    /// Permuted upper triangle.
    kp: Vec<usize>,
    ki: Vec<usize>,
    kx: Vec<T>,
    /// Position in `kx` of every stored entry of the original matrix.
    map: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
    dinv: Vec<T>,
    positive_pivots: usize,
}

impl<T: Scalar> LdlFactor<T> {
    pub fn new(upper: &CscMatrix<T>, ordering: Ordering) -> Result<Self, QpError> {
        let n = upper.ncols;
        if upper.nrows != n {
            return Err(QpError::Dimension("LDL' needs a square matrix".into()));
        }
        if !upper.is_upper_triangular() {
            return Err(QpError::Malformed(
                "LDL' input must be upper triangular".into(),
            ));
        }
        let perm = match ordering {
            Ordering::Natural => (0..n).collect(),
            Ordering::Amd => amd_order(upper)?,
        };
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        let (kp, ki, map) = symperm_pattern(upper, &iperm);
        let mut kx = vec![T::zero(); ki.len()];
        for (src, &dst) in map.iter().enumerate() {
            kx[dst] = upper.nzval[src];
        }
        let (etree, lnz) = elimination_tree(n, &kp, &ki);
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let mut f = Self {
            n,
            perm,
            kp,
            ki,
            kx,
            map,
            etree,
            lp,
            li: vec![0; total],
            lx: vec![T::zero(); total],
            d: vec![T::zero(); n],
            dinv: vec![T::zero(); n],
            positive_pivots: 0,
        };
        f.factor_numeric()?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz_l(&self) -> usize {
        self.li.len()
    }

    /// Number of positive entries of `D` (inertia check for quasi-definite systems).
    pub fn positive_pivots(&self) -> usize {
        self.positive_pivots
    }

    /// Refactors with new values on the original sparsity pattern.
    pub fn refactor(&mut self, values: &[T]) -> Result<(), QpError> {
        if values.len() != self.map.len() {
            return Err(QpError::Dimension(
                "refactor values do not match pattern".into(),
            ));
        }
        for (src, &dst) in self.map.iter().enumerate() {
            self.kx[dst] = values[src];
        }
        self.factor_numeric()
    }

    fn factor_numeric(&mut self) -> Result<(), QpError> {
        let n = self.n;
        let mut y_vals = vec![T::zero(); n];
        let mut y_used = vec![false; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_in_col: Vec<usize> = self.lp[..n].to_vec();
        self.positive_pivots = 0;
        for k in 0..n {
            let mut nnz_y = 0usize;
            self.d[k] = T::zero();
            for p in self.kp[k]..self.kp[k + 1] {
                let b = self.ki[p];
                if b == k {
                    self.d[k] = self.kx[p];
                    continue;
                }
                y_vals[b] = self.kx[p];
                if !y_used[b] {
                    y_used[b] = true;
                    elim[0] = b;
                    let mut n_elim = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if y_used[next] {
                            break;
                        }
                        y_used[next] = true;
                        elim[n_elim] = next;
                        n_elim += 1;
                        next = self.etree[next];
                    }
                    while n_elim > 0 {
                        n_elim -= 1;
                        y_idx[nnz_y] = elim[n_elim];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let slot = next_in_col[c];
                let yc = y_vals[c];
                for j in self.lp[c]..slot {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[slot] = k;
                self.lx[slot] = yc * self.dinv[c];
                self.d[k] -= yc * self.lx[slot];
                next_in_col[c] += 1;
                y_vals[c] = T::zero();
                y_used[c] = false;
            }
            if self.d[k] == T::zero() || !self.d[k].is_finite() {
                return Err(QpError::ZeroPivot(self.perm[k]));
            }
            if self.d[k] > T::zero() {
                self.positive_pivots += 1;
            }
            self.dinv[k] = T::one() / self.d[k];
        }
        Ok(())
    }

    /// Solves `K x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let mut work = vec![T::zero(); self.n];
        self.solve_with_work(b, &mut work);
    }

    /// As [`solve_in_place`](Self::solve_in_place) with caller-provided scratch of length `dim()`.
    pub fn solve_with_work(&self, b: &mut [T], work: &mut [T]) {
        debug_assert_eq!(b.len(), self.n);
        let x = work;
        for (xi, &p) in x.iter_mut().zip(&self.perm) {
            *xi = b[p];
        }
        for i in 0..self.n {
            let xi = x[i];
            if xi != T::zero() {
                for j in self.lp[i]..self.lp[i + 1] {
                    x[self.li[j]] -= self.lx[j] * xi;
                }
            }
        }
        for (xi, di) in x.iter_mut().zip(&self.dinv) {
            *xi *= *di;
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }
}

fn amd_order<T: Scalar>(upper: &CscMatrix<T>) -> Result<Vec<usize>, QpError> {
    let n = upper.ncols;
    if n == 0 {
        return Ok(Vec::new());
    }
    let control = amd::Control::default();
    let (p, _pinv, _info) = amd::order::<usize>(n, &upper.colptr, &upper.rowval, &control)
        .map_err(|s| QpError::Ordering(format!("{s:?}")))?;
    Ok(p)
}

/// Pattern of `P A P'` (upper triangle) and the entry map from `A` to it.
fn symperm_pattern<T: Scalar>(
    a: &CscMatrix<T>,
    iperm: &[usize],
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let n = a.ncols;
    let mut counts = vec![0usize; n + 1];
    for j in 0..n {
        let j2 = iperm[j];
        for p in a.colptr[j]..a.colptr[j + 1] {
            let i2 = iperm[a.rowval[p]];
            counts[i2.max(j2) + 1] += 1;
        }
    }
    for j in 0..n {
        counts[j + 1] += counts[j];
    }
    let mut next = counts.clone();
    let mut ki = vec![0usize; a.nnz()];
    let mut map = vec![0usize; a.nnz()];
    for j in 0..n {
        let j2 = iperm[j];
        for p in a.colptr[j]..a.colptr[j + 1] {
            let i2 = iperm[a.rowval[p]];
            let col = i2.max(j2);
            let slot = next[col];
            ki[slot] = i2.min(j2);
            map[p] = slot;
            next[col] += 1;
        }
    }
    (counts, ki, map)
}

fn elimination_tree(n: usize, kp: &[usize], ki: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut work = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for &row in &ki[kp[j]..kp[j + 1]] {
            let mut i = row;
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    (etree, lnz)
}
