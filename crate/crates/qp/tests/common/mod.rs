#![allow(dead_code)]

//! Dense QPs and a brute-force active-set oracle.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use wardrop_qp::{CscMatrix, QpProblem};

pub const INF: f64 = f64::INFINITY;

#[derive(Debug, Clone)]
pub struct Dense {
    pub p: Vec<Vec<f64>>,
    pub q: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl Dense {
    pub fn to_problem(&self) -> QpProblem<f64> {
        let n = self.q.len();
        let m = self.l.len();
        let mut pt = Vec::new();
        for i in 0..n {
            for j in i..n {
                if self.p[i][j] != 0.0 {
                    pt.push((i, j, self.p[i][j]));
                }
            }
        }
        let mut at = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if self.a[i][j] != 0.0 {
                    at.push((i, j, self.a[i][j]));
                }
            }
        }
        QpProblem::new(
            CscMatrix::from_triplets(n, n, &pt).unwrap(),
            self.q.clone(),
            CscMatrix::from_triplets(m, n, &at).unwrap(),
            self.l.clone(),
            self.u.clone(),
        )
        .unwrap()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut v = 0.0;
        for i in 0..n {
            for j in 0..n {
                v += 0.5 * x[i] * self.p[i][j] * x[j];
            }
            v += self.q[i] * x[i];
        }
        v
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn dense_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[piv][c].abs() < 1e-12 {
            return None;
        }
        m.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}

/// Tries every assignment of {inactive, at lower, at upper} to the rows,
/// solves the equality-constrained KKT system for each and keeps the best
/// point that is primal feasible with correctly signed multipliers.
pub fn enumerate_oracle(d: &Dense) -> Option<(Vec<f64>, f64)> {
    let n = d.q.len();
    let m = d.l.len();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let total = 3usize.pow(m as u32);
    for code in 0..total {
        let mut c = code;
        let mut act: Vec<(usize, f64, i32)> = Vec::new();
        let mut skip = false;
        for i in 0..m {
            let s = c % 3;
            c /= 3;
            match s {
                1 if d.l[i].is_finite() => act.push((i, d.l[i], -1)),
                2 if d.u[i].is_finite() => {
                    if d.l[i] == d.u[i] {
                        skip = true;
                    }
                    act.push((i, d.u[i], 1))
                }
                0 if d.l[i] == d.u[i] => skip = true,
                0 => {}
                _ => skip = true,
            }
        }
        if skip {
            continue;
        }
        let k = act.len();
        let mut kkt = vec![vec![0.0; n + k]; n + k];
        let mut rhs = vec![0.0; n + k];
        for i in 0..n {
            kkt[i][..n].copy_from_slice(&d.p[i]);
            rhs[i] = -d.q[i];
        }
        for (r, &(row, b, _)) in act.iter().enumerate() {
            for j in 0..n {
                kkt[n + r][j] = d.a[row][j];
                kkt[j][n + r] = d.a[row][j];
            }
            rhs[n + r] = b;
        }
        let Some(sol) = dense_solve(kkt, rhs) else {
            continue;
        };
        let x = &sol[..n];
        let feasible = (0..m).all(|i| {
            let ax: f64 = (0..n).map(|j| d.a[i][j] * x[j]).sum();
            ax >= d.l[i] - 1e-9 && ax <= d.u[i] + 1e-9
        });
        let signs = act.iter().enumerate().all(|(r, &(row, _, side))| {
            let y = sol[n + r];
            d.l[row] == d.u[row] || (side < 0 && y <= 1e-9) || (side > 0 && y >= -1e-9)
        });
        if feasible && signs {
            let obj = d.objective(x);
            if best.as_ref().is_none_or(|b| obj < b.1) {
                best = Some((x.to_vec(), obj));
            }
        }
    }
    best
}

/// Strictly convex QP with a known feasible point.
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize, one_sided: bool) -> Dense {
    let b: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = (0..n).map(|k| b[k][i] * b[k][j]).sum::<f64>();
        }
        p[i][i] += 0.1;
    }
    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let a: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let mut row: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        rng.gen_range(-2.0..2.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            let k = rng.gen_range(0..n);
            row[k] = rng.gen_range(0.5..2.0);
            row
        })
        .collect();
    let mut equalities = 0;
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut l = Vec::with_capacity(m);
    let mut u = Vec::with_capacity(m);
    for row in &a {
        let v: f64 = row.iter().zip(&x0).map(|(r, x)| r * x).sum();
        if one_sided {
            l.push(-INF);
            u.push(v + rng.gen_range(0.0..0.5));
            continue;
        }
        match rng.gen_range(0..4) {
            0 => {
                l.push(v - rng.gen_range(0.0..0.5));
                u.push(INF);
            }
            1 => {
                l.push(-INF);
                u.push(v + rng.gen_range(0.0..0.5));
            }
            2 if 2 * (equalities + 1) <= n => {
                equalities += 1;
                l.push(v);
                u.push(v);
            }
            _ => {
                l.push(v - rng.gen_range(0.0..0.5));
                u.push(v + rng.gen_range(0.0..0.5));
            }
        }
    }
    Dense { p, q, a, l, u }
}
