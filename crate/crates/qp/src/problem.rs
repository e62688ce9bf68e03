//! Problem data: minimize `0.5 x'Px + q'x` subject to `l <= Ax <= u`.

use std::io::{BufRead, Write};

use crate::csc::CscMatrix;
use crate::error::QpError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<T> {
    /// Upper triangle of the symmetric positive-semidefinite objective matrix.
    pub p: CscMatrix<T>,
    pub q: Vec<T>,
    pub a: CscMatrix<T>,
    pub l: Vec<T>,
    pub u: Vec<T>,
}

impl<T: Scalar> QpProblem<T> {
    pub fn new(
        p: CscMatrix<T>,
        q: Vec<T>,
        a: CscMatrix<T>,
        l: Vec<T>,
        u: Vec<T>,
    ) -> Result<Self, QpError> {
        let prob = Self { p, q, a, l, u };
        prob.validate()?;
        Ok(prob)
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.q.len();
        let m = self.l.len();
        if self.p.nrows != n || self.p.ncols != n {
            return Err(QpError::Dimension(format!(
                "P is {}x{}, expected {n}x{n}",
                self.p.nrows, self.p.ncols
            )));
        }
        if self.a.ncols != n || self.a.nrows != m || self.u.len() != m {
            return Err(QpError::Dimension(format!(
                "A is {}x{}, l has {m}, u has {}, q has {n}",
                self.a.nrows,
                self.a.ncols,
                self.u.len()
            )));
        }
        if !self.p.is_upper_triangular() {
            return Err(QpError::Objective("entries below the diagonal".into()));
        }
        for j in 0..n {
            if self.p.get(j, j) < T::zero() {
                return Err(QpError::Objective(format!("negative diagonal at {j}")));
            }
        }
        let finite = |v: &[T]| v.iter().all(|x| !x.is_nan());
        if !finite(&self.q) || !finite(&self.p.nzval) || !finite(&self.a.nzval) {
            return Err(QpError::Malformed("NaN in problem data".into()));
        }
        for (row, (&lo, &hi)) in self.l.iter().zip(&self.u).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(QpError::Bounds {
                    row,
                    lower: lo.as_f64(),
                    upper: hi.as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[T]) -> T {
        let mut px = vec![T::zero(); x.len()];
        self.p.sym_upper_mul_vec(x, &mut px);
        let half = T::lit(0.5);
        x.iter()
            .zip(&px)
            .zip(&self.q)
            .map(|((&xi, &pxi), &qi)| half * xi * pxi + qi * xi)
            .sum()
    }

    /// Writes the problem as sparse triplets.
    ///
    /// ```text
    /// qp <n> <m>
    /// P <nnz>
    /// <row> <col> <value>      (nnz lines, upper triangle)
    /// q
    /// <value>                  (n lines)
    /// A <nnz>
    /// <row> <col> <value>
    /// bounds
    /// <lower> <upper>          (m lines, `inf` / `-inf` allowed)
    /// ```
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "qp {} {}", self.num_vars(), self.num_constraints())?;
        writeln!(w, "P {}", self.p.nnz())?;
        for (i, j, v) in self.p.triplets() {
            writeln!(w, "{i} {j} {v}")?;
        }
        writeln!(w, "q")?;
        for v in &self.q {
            writeln!(w, "{v}")?;
        }
        writeln!(w, "A {}", self.a.nnz())?;
        for (i, j, v) in self.a.triplets() {
            writeln!(w, "{i} {j} {v}")?;
        }
        writeln!(w, "bounds")?;
        for (lo, hi) in self.l.iter().zip(&self.u) {
            writeln!(w, "{lo} {hi}")?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: R) -> Result<Self, QpError> {
        let mut lines = r
            .lines()
            .map(|l| l.map_err(|e| QpError::Dump(e.to_string())));
        let mut next = |what: &str| -> Result<String, QpError> {
            lines
                .next()
                .unwrap_or_else(|| Err(QpError::Dump(format!("unexpected end, wanted {what}"))))
        };
        let num = |s: &str| -> Result<T, QpError> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| QpError::Dump(format!("bad number `{s}`")))?;
            Ok(T::lit(v))
        };
        let idx = |s: &str| -> Result<usize, QpError> {
            s.trim()
                .parse()
                .map_err(|_| QpError::Dump(format!("bad index `{s}`")))
        };
        let header = next("header")?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 || h[0] != "qp" {
            return Err(QpError::Dump("missing `qp n m` header".into()));
        }
        let (n, m) = (idx(h[1])?, idx(h[2])?);
        let read_block = |next: &mut dyn FnMut(&str) -> Result<String, QpError>,
                          tag: &str,
                          rows: usize,
                          cols: usize|
         -> Result<CscMatrix<T>, QpError> {
            let line = next(tag)?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 2 || parts[0] != tag {
                return Err(QpError::Dump(format!("expected `{tag} <nnz>`")));
            }
            let nnz = idx(parts[1])?;
            let mut trip = Vec::with_capacity(nnz);
            for _ in 0..nnz {
                let line = next("triplet")?;
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(QpError::Dump(format!("bad triplet `{line}`")));
                }
                trip.push((idx(f[0])?, idx(f[1])?, num(f[2])?));
            }
            CscMatrix::from_triplets(rows, cols, &trip)
        };
        let p = read_block(&mut next, "P", n, n)?;
        if next("q")?.trim() != "q" {
            return Err(QpError::Dump("expected `q`".into()));
        }
        let mut q = Vec::with_capacity(n);
        for _ in 0..n {
            q.push(num(&next("q value")?)?);
        }
        let a = read_block(&mut next, "A", m, n)?;
        if next("bounds")?.trim() != "bounds" {
            return Err(QpError::Dump("expected `bounds`".into()));
        }
        let mut l = Vec::with_capacity(m);
        let mut u = Vec::with_capacity(m);
        for _ in 0..m {
            let line = next("bound")?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(QpError::Dump(format!("bad bound line `{line}`")));
            }
            l.push(num(f[0])?);
            u.push(num(f[1])?);
        }
        Self::new(p, q, a, l, u)
    }
}
