//! Operator-splitting (ADMM) solver with Ruiz equilibration and active-set polish.
//!
//! Iterates on the scaled problem
//!
//! ```text
//! minimize    0.5 x'Px + q'x
//! subject to  Ax = z,  l <= z <= u
//! ```
//!
//! solving one quasi-definite KKT system per iteration with a factorization
//! that is computed once (and only recomputed when the step parameter is
//! adapted).

use log::debug;

use crate::csc::CscMatrix;
use crate::error::QpError;
use crate::ldl::{LdlFactor, Ordering};
use crate::problem::QpProblem;
use crate::scalar::{inf_norm, Scalar};

const MIN_SCALING: f64 = 1e-4;
const MAX_SCALING: f64 = 1e4;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct Settings<T> {
    pub rho: T,
    pub sigma: T,
    pub alpha: T,
    pub tol_primal: T,
    pub tol_dual: T,
    pub max_iters: usize,
    pub scaling_iters: usize,
    /// Rebalance the step parameter from the residual ratio (requires a refactorization).
    pub adaptive_rho: bool,
    pub adaptive_rho_interval: usize,
    pub adaptive_rho_tolerance: T,
    pub check_interval: usize,
    pub polish: bool,
    /// Relative residual level at which intermediate polish attempts start.
    pub polish_trigger: T,
    /// Minimum number of iterations between intermediate polish attempts.
    pub polish_interval: usize,
    pub polish_delta: T,
    pub polish_refine_iters: usize,
    pub infeasibility_tol: T,
    pub ordering: Ordering,
}

impl<T: Scalar> Default for Settings<T> {
    fn default() -> Self {
        Self {
            rho: T::lit(0.1),
            sigma: T::lit(1e-6),
            alpha: T::lit(1.6),
            tol_primal: T::lit(1e-6),
            tol_dual: T::lit(1e-6),
            max_iters: 200_000,
            scaling_iters: 10,
            adaptive_rho: true,
            adaptive_rho_interval: 50,
            adaptive_rho_tolerance: T::lit(5.0),
            check_interval: 10,
            polish: true,
            polish_trigger: T::lit(1e-3),
            polish_interval: 500,
            polish_delta: T::lit(1e-7),
            polish_refine_iters: 25,
            infeasibility_tol: T::lit(1e-8),
            ordering: Ordering::Amd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QpStatus::Optimal => "optimal",
            QpStatus::MaxIterations => "max-iters",
            QpStatus::Infeasible => "infeasible-detected",
        })
    }
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    /// Multipliers of `l <= Ax <= u`: positive where the upper bound binds,
    /// negative where the lower bound binds.
    pub y: Vec<T>,
    pub status: QpStatus,
    /// `max_i dist(a_i'x, [l_i, u_i])` on the unscaled problem.
    pub primal_residual: T,
    /// `||Px + q + A'y||_inf` on the unscaled problem.
    pub dual_residual: T,
    pub objective: T,
    pub iterations: usize,
    pub polished: bool,
    pub rho_updates: usize,
}

/// Solves with default settings and the given tolerances and iteration cap.
pub fn solve_qp<T: Scalar>(
    problem: &QpProblem<T>,
    tol_primal: T,
    tol_dual: T,
    max_iters: usize,
) -> Result<QpSolution<T>, QpError> {
    let settings = Settings {
        tol_primal,
        tol_dual,
        max_iters,
        ..Settings::default()
    };
    solve_with(problem, &settings)
}

pub fn solve_with<T: Scalar>(
    problem: &QpProblem<T>,
    settings: &Settings<T>,
) -> Result<QpSolution<T>, QpError> {
    problem.validate()?;
    Workspace::new(problem, settings)?.run()
}

/// Unscaled residuals of a candidate primal-dual pair.
pub fn residuals<T: Scalar>(problem: &QpProblem<T>, x: &[T], y: &[T]) -> (T, T) {
    let mut ax = vec![T::zero(); problem.num_constraints()];
    problem.a.mul_vec(x, &mut ax);
    let prim = ax
        .iter()
        .zip(problem.l.iter().zip(&problem.u))
        .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(T::zero()))
        .fold(T::zero(), T::max);
    let mut grad = vec![T::zero(); problem.num_vars()];
    problem.p.sym_upper_mul_vec(x, &mut grad);
    let mut aty = vec![T::zero(); problem.num_vars()];
    problem.a.tr_mul_vec(y, &mut aty);
    let dual = grad
        .iter()
        .zip(&problem.q)
        .zip(&aty)
        .map(|((&g, &q), &a)| (g + q + a).abs())
        .fold(T::zero(), T::max);
    (prim, dual)
}

struct Scaling<T> {
    d: Vec<T>,
    e: Vec<T>,
    c: T,
}

struct Workspace<'a, T> {
    original: &'a QpProblem<T>,
    settings: &'a Settings<T>,
    p: CscMatrix<T>,
    q: Vec<T>,
    a: CscMatrix<T>,
    at: CscMatrix<T>,
    l: Vec<T>,
    u: Vec<T>,
    scaling: Scaling<T>,
    rho: T,
    rho_vec: Vec<T>,
    kkt: CscMatrix<T>,
    rho_diag_pos: Vec<usize>,
    ldl: LdlFactor<T>,
}

fn limit<T: Scalar>(v: T) -> T {
    if v < T::lit(MIN_SCALING) {
        T::one()
    } else {
        v.min(T::lit(MAX_SCALING))
    }
}

fn is_equality<T: Scalar>(lo: T, hi: T) -> bool {
    (hi - lo).abs() < T::lit(1e-4) * T::one().max(lo.abs())
}

impl<'a, T: Scalar> Workspace<'a, T> {
    fn new(problem: &'a QpProblem<T>, settings: &'a Settings<T>) -> Result<Self, QpError> {
        let n = problem.num_vars();
        let m = problem.num_constraints();
        let mut p = problem.p.clone();
        let mut q = problem.q.clone();
        let mut a = problem.a.clone();
        let mut d = vec![T::one(); n];
        let mut e = vec![T::one(); m];
        let mut c = T::one();
        for _ in 0..settings.scaling_iters {
            let pn = p.sym_upper_col_inf_norms();
            let an = a.col_inf_norms();
            let d_step: Vec<T> = pn
                .iter()
                .zip(&an)
                .map(|(&x, &y)| T::one() / limit(x.max(y)).sqrt())
                .collect();
            let e_step: Vec<T> = a
                .row_inf_norms()
                .iter()
                .map(|&v| T::one() / limit(v).sqrt())
                .collect();
            p.scale(&d_step, &d_step);
            a.scale(&e_step, &d_step);
            for (qi, s) in q.iter_mut().zip(&d_step) {
                *qi *= *s;
            }
            for (di, s) in d.iter_mut().zip(&d_step) {
                *di *= *s;
            }
            for (ei, s) in e.iter_mut().zip(&e_step) {
                *ei *= *s;
            }
        }
        if settings.scaling_iters > 0 {
            let pn = p.sym_upper_col_inf_norms();
            let mean_p = if n > 0 {
                pn.iter().copied().sum::<T>() / T::from_usize_lossy(n)
            } else {
                T::zero()
            };
            c = T::one() / limit(mean_p.max(inf_norm(&q)));
            for v in p.nzval.iter_mut() {
                *v *= c;
            }
            for v in q.iter_mut() {
                *v *= c;
            }
        }
        let l: Vec<T> = problem.l.iter().zip(&e).map(|(&v, &s)| v * s).collect();
        let u: Vec<T> = problem.u.iter().zip(&e).map(|(&v, &s)| v * s).collect();
        let at = a.transpose();
        let rho = settings.rho;
        let rho_vec = rho_vector(rho, &l, &u);
        let (kkt, rho_diag_pos) = assemble_kkt(&p, &at, settings.sigma, &rho_vec);
        let ldl = LdlFactor::new(&kkt, settings.ordering)?;
        debug!(
            "qp: n={n} m={m} nnz(A)={} kkt dim={} nnz(L)={}",
            a.nnz(),
            kkt.ncols,
            ldl.nnz_l()
        );
        Ok(Self {
            original: problem,
            settings,
            p,
            q,
            a,
            at,
            l,
            u,
            scaling: Scaling { d, e, c },
            rho,
            rho_vec,
            kkt,
            rho_diag_pos,
            ldl,
        })
    }

    fn update_rho(&mut self, rho: T) -> Result<(), QpError> {
        self.rho = rho;
        self.rho_vec = rho_vector(rho, &self.l, &self.u);
        for (i, &pos) in self.rho_diag_pos.iter().enumerate() {
            self.kkt.nzval[pos] = -T::one() / self.rho_vec[i];
        }
        self.ldl.refactor(&self.kkt.nzval)
    }

    fn unscale(&self, x: &[T], y: &[T]) -> (Vec<T>, Vec<T>) {
        let s = &self.scaling;
        let x_out = x.iter().zip(&s.d).map(|(&v, &d)| v * d).collect();
        let y_out = y.iter().zip(&s.e).map(|(&v, &e)| v * e / s.c).collect();
        (x_out, y_out)
    }

    fn run(mut self) -> Result<QpSolution<T>, QpError> {
        let n = self.q.len();
        let m = self.l.len();
        let st = self.settings;
        let mut x = vec![T::zero(); n];
        let mut z = vec![T::zero(); m];
        let mut y = vec![T::zero(); m];
        let mut y_prev = vec![T::zero(); m];
        let mut rhs = vec![T::zero(); n + m];
        let mut work = vec![T::zero(); n + m];
        let mut rho_inv: Vec<T> = self.rho_vec.iter().map(|&r| T::one() / r).collect();
        let mut ax = vec![T::zero(); m];
        let mut px = vec![T::zero(); n];
        let mut aty = vec![T::zero(); n];
        let mut rho_updates = 0usize;
        let mut last_rho_step: Option<bool> = None;
        let mut next_polish = 0usize;
        let one = T::one();
        let alpha = st.alpha;
        let check = st.check_interval.max(1);

        let mut iter = 0usize;
        let mut status = QpStatus::MaxIterations;
        while iter < st.max_iters {
            iter += 1;
            y_prev.copy_from_slice(&y);

            for k in 0..n {
                rhs[k] = st.sigma * x[k] - self.q[k];
            }
            for i in 0..m {
                rhs[n + i] = z[i] - y[i] * rho_inv[i];
            }
            self.ldl.solve_with_work(&mut rhs, &mut work);
            for k in 0..n {
                x[k] = alpha * rhs[k] + (one - alpha) * x[k];
            }
            for i in 0..m {
                let zt = z[i] + (rhs[n + i] - y[i]) * rho_inv[i];
                let relaxed = alpha * zt + (one - alpha) * z[i];
                let znew = (relaxed + y[i] * rho_inv[i]).max(self.l[i]).min(self.u[i]);
                y[i] += self.rho_vec[i] * (relaxed - znew);
                z[i] = znew;
            }
            if !iter.is_multiple_of(check) && iter != st.max_iters {
                continue;
            }
            self.a.mul_vec(&x, &mut ax);
            self.p.sym_upper_mul_vec(&x, &mut px);
            self.at.mul_vec(&y, &mut aty);
            let s = &self.scaling;
            let prim = ax
                .iter()
                .zip(&z)
                .zip(&s.e)
                .map(|((&a, &b), &e)| ((a - b) / e).abs())
                .fold(T::zero(), T::max);
            let dual = px
                .iter()
                .zip(&self.q)
                .zip(&aty)
                .zip(&s.d)
                .map(|(((&p, &q), &a), &d)| ((p + q + a) / d).abs())
                .fold(T::zero(), T::max)
                / s.c;

            if iter.is_multiple_of(1000) {
                log::trace!(
                    "qp: iteration {iter}, residuals {prim:e} {dual:e}, rho {}",
                    self.rho
                );
            }
            if prim <= st.tol_primal && dual <= st.tol_dual {
                status = QpStatus::Optimal;
                break;
            }

            if self.primal_infeasible(&y, &y_prev) {
                status = QpStatus::Infeasible;
                break;
            }

            let prim_scale = inf_norm(&ax).max(inf_norm(&z)).max(T::lit(1e-30));
            let dual_scale = inf_norm(&px)
                .max(inf_norm(&aty))
                .max(inf_norm(&self.q))
                .max(T::lit(1e-30));
            let prim_rel = inf_norm_diff(&ax, &z) / prim_scale;
            let dual_rel = px
                .iter()
                .zip(&self.q)
                .zip(&aty)
                .map(|((&p, &q), &a)| (p + q + a).abs())
                .fold(T::zero(), T::max)
                / dual_scale;

            if st.polish
                && iter >= next_polish
                && prim_rel <= st.polish_trigger
                && dual_rel <= st.polish_trigger
            {
                if let Some(sol) = self.polish(&x, &z, &y)? {
                    debug!("qp: polished at iteration {iter}");
                    return Ok(QpSolution {
                        iterations: iter,
                        rho_updates,
                        ..sol
                    });
                }
                next_polish = iter + st.polish_interval;
            }

            if st.adaptive_rho && iter.is_multiple_of(st.adaptive_rho_interval.max(check)) {
                let ratio = (prim_rel / dual_rel.max(T::lit(1e-30))).sqrt();
                let mut new_rho = (self.rho * ratio).max(T::lit(RHO_MIN)).min(T::lit(RHO_MAX));
                if new_rho > self.rho * st.adaptive_rho_tolerance
                    || new_rho < self.rho / st.adaptive_rho_tolerance
                {
                    let up = new_rho > self.rho;
                    if last_rho_step == Some(!up) {
                        // direction flipped: settle between the two values
                        new_rho = (new_rho * self.rho).sqrt();
                    }
                    last_rho_step = Some(up);
                    self.update_rho(new_rho)?;
                    rho_inv = self.rho_vec.iter().map(|&r| T::one() / r).collect();
                    rho_updates += 1;
                    debug!("qp: iteration {iter}, rho -> {new_rho}");
                }
            }
        }

        if status == QpStatus::Optimal && st.polish {
            if let Some(sol) = self.polish(&x, &z, &y)? {
                return Ok(QpSolution {
                    iterations: iter,
                    rho_updates,
                    ..sol
                });
            }
        }
        let (xu, yu) = self.unscale(&x, &y);
        let (prim, dual) = residuals(self.original, &xu, &yu);
        if status == QpStatus::Optimal && (prim > st.tol_primal || dual > st.tol_dual) {
            // Scaled-space termination can be optimistic after unscaling.
            status = QpStatus::MaxIterations;
        }
        let objective = self.original.objective(&xu);
        Ok(QpSolution {
            x: xu,
            y: yu,
            status,
            primal_residual: prim,
            dual_residual: dual,
            objective,
            iterations: iter,
            polished: false,
            rho_updates,
        })
    }

    /// Certificate test `A'dy ~ 0`, `u'max(dy,0) + l'min(dy,0) < 0` on the dual step.
    fn primal_infeasible(&self, y: &[T], y_prev: &[T]) -> bool {
        let s = &self.scaling;
        let dy: Vec<T> = y
            .iter()
            .zip(y_prev)
            .zip(&s.e)
            .map(|((&a, &b), &e)| (a - b) * e)
            .collect();
        let norm = inf_norm(&dy);
        if norm <= T::lit(1e-30) {
            return false;
        }
        let tol = self.settings.infeasibility_tol * norm;
        let mut support = T::zero();
        for (i, &v) in dy.iter().enumerate() {
            if v > T::zero() {
                let hi = self.original.u[i];
                if hi.is_infinite() {
                    return false;
                }
                support += hi * v;
            } else if v < T::zero() {
                let lo = self.original.l[i];
                if lo.is_infinite() {
                    return false;
                }
                support += lo * v;
            }
        }
        if support >= -tol {
            return false;
        }
        let mut atdy = vec![T::zero(); self.original.num_vars()];
        self.original.a.tr_mul_vec(&dy, &mut atdy);
        inf_norm(&atdy) <= tol
    }

    /// Guesses the active set from the ADMM iterate and solves the reduced
    /// equality-constrained KKT system by iterative refinement started at the
    /// iterate itself. Every refinement step is tested as a certificate, with
    /// multipliers of the wrong sign clipped to zero.
    fn polish(&self, x: &[T], z: &[T], y: &[T]) -> Result<Option<QpSolution<T>>, QpError> {
        let n = x.len();
        let m = z.len();
        let st = self.settings;
        // side: 0 equality, -1 lower bound, 1 upper bound
        let mut rows: Vec<usize> = Vec::new();
        let mut side: Vec<i8> = Vec::new();
        for i in 0..m {
            let s = if is_equality(self.l[i], self.u[i]) {
                0
            } else if z[i] - self.l[i] < -y[i] {
                -1
            } else if self.u[i] - z[i] < y[i] {
                1
            } else {
                continue;
            };
            rows.push(i);
            side.push(s);
        }
        let k = rows.len();
        let delta = st.polish_delta;
        let a_act = self.a.select_rows(&rows);
        let a_act_t = a_act.transpose();
        let mut trip: Vec<(usize, usize, T)> =
            Vec::with_capacity(self.p.nnz() + n + a_act.nnz() + k);
        let mut base: Vec<(usize, usize, T)> = Vec::with_capacity(self.p.nnz() + a_act.nnz());
        for (i, j, v) in self.p.triplets() {
            trip.push((i, j, v));
            base.push((i, j, v));
        }
        for j in 0..n {
            trip.push((j, j, delta));
        }
        for r in 0..k {
            for (j, v) in a_act_t.col(r) {
                trip.push((j, n + r, v));
                base.push((j, n + r, v));
            }
            trip.push((n + r, n + r, -delta));
        }
        let kreg = CscMatrix::from_triplets(n + k, n + k, &trip)?;
        let kbase = CscMatrix::from_triplets(n + k, n + k, &base)?;
        let ldl = match LdlFactor::new(&kreg, st.ordering) {
            Ok(f) => f,
            Err(QpError::ZeroPivot(_)) => {
                debug!("qp: polish factorization hit a zero pivot");
                return Ok(None);
            }
            Err(e) => return Err(e),
        };
        let mut rhs = vec![T::zero(); n + k];
        for j in 0..n {
            rhs[j] = -self.q[j];
        }
        for (r, &i) in rows.iter().enumerate() {
            rhs[n + r] = if side[r] == 1 { self.u[i] } else { self.l[i] };
        }
        let mut sol: Vec<T> = x
            .iter()
            .copied()
            .chain(rows.iter().map(|&i| y[i]))
            .collect();
        let mut resid = vec![T::zero(); n + k];
        let mut yp = vec![T::zero(); m];
        let mut best = T::infinity();
        for _ in 0..st.polish_refine_iters {
            kbase.sym_upper_mul_vec(&sol, &mut resid);
            for (r, b) in resid.iter_mut().zip(&rhs) {
                *r = *b - *r;
            }
            ldl.solve_in_place(&mut resid);
            for (s, d) in sol.iter_mut().zip(&resid) {
                *s += *d;
            }
            if sol.iter().any(|v| !v.is_finite()) {
                break;
            }
            for (r, &i) in rows.iter().enumerate() {
                let v = sol[n + r];
                yp[i] = match side[r] {
                    -1 => v.min(T::zero()),
                    1 => v.max(T::zero()),
                    _ => v,
                };
            }
            let (xu, yu) = self.unscale(&sol[..n], &yp);
            let (prim, dual) = residuals(self.original, &xu, &yu);
            if prim <= st.tol_primal && dual <= st.tol_dual {
                let objective = self.original.objective(&xu);
                return Ok(Some(QpSolution {
                    x: xu,
                    y: yu,
                    status: QpStatus::Optimal,
                    primal_residual: prim,
                    dual_residual: dual,
                    objective,
                    iterations: 0,
                    polished: true,
                    rho_updates: 0,
                }));
            }
            best = best.min(prim.max(dual));
        }
        debug!("qp: polish rejected, best residual {best:e} with {k} active rows");
        Ok(None)
    }
}

fn inf_norm_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(T::zero(), T::max)
}

fn rho_vector<T: Scalar>(rho: T, l: &[T], u: &[T]) -> Vec<T> {
    l.iter()
        .zip(u)
        .map(|(&lo, &hi)| {
            if lo.is_infinite() && hi.is_infinite() {
                T::lit(RHO_MIN)
            } else if is_equality(lo, hi) {
                rho * T::lit(RHO_EQ_FACTOR)
            } else {
                rho
            }
        })
        .collect()
}

/// Upper triangle of `[P + sigma I, A'; A, -diag(1/rho)]` and the positions
/// of the `-1/rho` diagonal entries in its value array.
fn assemble_kkt<T: Scalar>(
    p: &CscMatrix<T>,
    at: &CscMatrix<T>,
    sigma: T,
    rho: &[T],
) -> (CscMatrix<T>, Vec<usize>) {
    let n = p.ncols;
    let m = at.ncols;
    let mut colptr = Vec::with_capacity(n + m + 1);
    let mut rowval = Vec::with_capacity(p.nnz() + n + at.nnz() + m);
    let mut nzval = Vec::with_capacity(rowval.capacity());
    colptr.push(0);
    for j in 0..n {
        let mut has_diag = false;
        for (i, v) in p.col(j) {
            if i == j {
                rowval.push(i);
                nzval.push(v + sigma);
                has_diag = true;
            } else {
                rowval.push(i);
                nzval.push(v);
            }
        }
        if !has_diag {
            rowval.push(j);
            nzval.push(sigma);
        }
        colptr.push(rowval.len());
    }
    let mut rho_pos = Vec::with_capacity(m);
    for i in 0..m {
        for (j, v) in at.col(i) {
            rowval.push(j);
            nzval.push(v);
        }
        rho_pos.push(rowval.len());
        rowval.push(n + i);
        nzval.push(-T::one() / rho[i]);
        colptr.push(rowval.len());
    }
    (
        CscMatrix {
            nrows: n + m,
            ncols: n + m,
            colptr,
            rowval,
            nzval,
        },
        rho_pos,
    )
}
