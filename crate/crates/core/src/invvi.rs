//! Inverse variational inequality: recover a shared polynomial latency from
//! observed equilibria by a sparse convex QP.
//!
//! Columns are ordered `[beta_0..beta_n | eps_1..eps_K | y blocks]`. Rows are
//! `[beta_0 = 1 | eps >= 0 | per observation: dual rows, gap row, monotonicity rows]`.
//!
//! With gap normalization on (the default), observation `k` is expressed in
//! time units of the mean free-flow time and flow units of its total demand.
//! Slacks and duals are reported back in the original units.

use std::io::Write;
use std::ops::Range;

use log::{debug, info};
use wardrop_qp::{solve_with, CscMatrix, QpProblem, QpStatus, Scalar, Settings};

use crate::cost_bpr::{congestion_ratios, PolynomialCost};
use crate::error::{Error, Result};
use crate::netmodel::{shortest_path_tree, DemandSet, FlowState, MulticlassNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlackNorm {
    /// `sum_k eps_k^2`
    SquaredL2,
    /// `sum_k eps_k`
    L1,
}

impl SlackNorm {
    pub fn name(self) -> &'static str {
        match self {
            SlackNorm::SquaredL2 => "squared-l2",
            SlackNorm::L1 => "l1",
        }
    }
}

impl std::str::FromStr for SlackNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "squared-l2" | "l2sq" | "squared_l2" => Ok(SlackNorm::SquaredL2),
            "l1" => Ok(SlackNorm::L1),
            other => Err(Error::Config(format!(
                "unknown slack norm `{other}` (squared-l2, l1)"
            ))),
        }
    }
}

/// How dual potentials are shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualGrouping {
    /// One potential vector per OD pair and class.
    OdPair,
    /// One potential vector per origin and class; same optimum, far fewer columns.
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualRestriction {
    /// Potentials only on the nodes of the pair's own class copy.
    ClassCopy,
    /// Potentials on every conceptual node, dual rows on every conceptual link.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotonicityForm {
    /// Consecutive distinct sorted ratios.
    Chain,
    /// Every ordered pair with strictly smaller ratio.
    AllPairs,
}

#[derive(Debug, Clone)]
pub struct EstimationConfig<T> {
    pub degree: usize,
    pub kernel_c: T,
    pub gamma: T,
    pub slack_norm: SlackNorm,
    pub grouping: DualGrouping,
    pub restriction: DualRestriction,
    pub monotonicity: MonotonicityForm,
    pub normalize_gap: bool,
    pub solver: Settings<T>,
}

impl<T: Scalar> Default for EstimationConfig<T> {
    fn default() -> Self {
        Self {
            degree: 5,
            kernel_c: T::lit(1.5),
            gamma: T::lit(0.01),
            slack_norm: SlackNorm::SquaredL2,
            grouping: DualGrouping::OdPair,
            restriction: DualRestriction::ClassCopy,
            monotonicity: MonotonicityForm::Chain,
            normalize_gap: true,
            solver: Settings::default(),
        }
    }
}

impl<T: Scalar> EstimationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::Config("degree must be at least 1".into()));
        }
        if !(self.kernel_c > T::zero()) || !self.kernel_c.is_finite() {
            return Err(Error::Config(format!(
                "kernel parameter c must be > 0, got {}",
                self.kernel_c
            )));
        }
        if !(self.gamma > T::zero()) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Observation<'a, T> {
    pub network: &'a MulticlassNetwork<T>,
    pub demands: &'a DemandSet<T>,
    pub flows: &'a FlowState<T>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `w_j = 1 / (C(n, j) c^(n - j))`, `j = 0..=n`.
pub fn regularizer_weights<T: Scalar>(n: usize, c: T) -> Result<Vec<T>> {
    if !(c > T::zero()) || !c.is_finite() {
        return Err(Error::Config(format!(
            "kernel parameter c must be > 0, got {c}"
        )));
    }
    Ok((0..=n)
        .map(|j| T::one() / (T::lit(binomial(n, j)) * c.powi((n - j) as i32)))
        .collect())
}

fn sorted_links<T: Scalar>(ratios: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ratios.len()).collect();
    idx.sort_by(|&a, &b| {
        ratios[a]
            .partial_cmp(&ratios[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Pairs `(i, j)` with `z_i < z_j` linking consecutive distinct ratios; the
/// first link of each group of equal ratios represents the group.
pub fn monotonicity_chain<T: Scalar>(ratios: &[T]) -> Vec<(usize, usize)> {
    let idx = sorted_links(ratios);
    let mut reps: Vec<usize> = Vec::new();
    for &i in &idx {
        match reps.last() {
            Some(&r) if ratios[r] == ratios[i] => {}
            _ => reps.push(i),
        }
    }
    reps.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Every pair `(i, j)` with `z_i < z_j`.
pub fn monotonicity_all_pairs<T: Scalar>(ratios: &[T]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..ratios.len() {
        for j in 0..ratios.len() {
            if ratios[i] < ratios[j] {
                out.push((i, j));
            }
        }
    }
    out
}

/// `z^0..z^n` accumulated with an error-free product term at every step.
pub(crate) fn compensated_powers<T: Scalar>(z: T, n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::one());
    let mut hi = T::one();
    let mut lo = T::zero();
    for _ in 0..n {
        let p = hi * z;
        let err = hi.mul_add(z, -p);
        lo = lo * z + err;
        hi = p;
        out.push(hi + lo);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct YBlock {
    pub observation: usize,
    pub class: usize,
    /// 0-based physical node.
    pub origin: usize,
    /// `None` when the block serves every destination of `origin`.
    pub destination: Option<usize>,
    pub start: usize,
    pub len: usize,
    /// Physical node count of the observation's network.
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRows {
    pub dual: Range<usize>,
    pub gap: usize,
    pub monotonicity: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableMap {
    pub beta: Range<usize>,
    pub epsilon: Range<usize>,
    pub y: Range<usize>,
    pub y_blocks: Vec<YBlock>,
    pub beta0_row: usize,
    pub epsilon_rows: Range<usize>,
    pub rows: Vec<ObservationRows>,
    pub restriction: DualRestriction,
}

impl VariableMap {
    pub fn beta(&self, j: usize) -> usize {
        self.beta.start + j
    }

    pub fn epsilon(&self, k: usize) -> usize {
        self.epsilon.start + k
    }

    /// Column of block `b` at `node` of copy `class` (`class` is ignored under the class-copy restriction).
    pub fn y(&self, b: usize, class: usize, node: usize) -> usize {
        let blk = &self.y_blocks[b];
        match self.restriction {
            DualRestriction::ClassCopy => blk.start + node,
            DualRestriction::Full => blk.start + class * blk.nodes + node,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.y.end
    }
}

#[derive(Debug, Clone)]
pub struct AssembledQp<T> {
    pub problem: QpProblem<T>,
    pub map: VariableMap,
    pub degree: usize,
    /// Factor from original to normalized slack units, per observation.
    pub gap_scales: Vec<T>,
    /// Factor from original to normalized time units, per observation.
    pub time_scales: Vec<T>,
    pub ratios: Vec<Vec<T>>,
    pub kernel_c: T,
    pub gamma: T,
    pub slack_norm: SlackNorm,
}

impl<T: Scalar> AssembledQp<T> {
    /// Replaces the objective; the constraint matrix is kept.
    pub fn set_objective(&mut self, kernel_c: T, gamma: T, slack_norm: SlackNorm) -> Result<()> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be > 0, got {gamma}")));
        }
        let w = regularizer_weights(self.degree, kernel_c)?;
        let n = self.map.num_vars();
        let mut diag = Vec::new();
        for (j, wj) in w.iter().enumerate() {
            diag.push((
                self.map.beta(j),
                self.map.beta(j),
                T::lit(2.0) * gamma * *wj,
            ));
        }
        let mut q = vec![T::zero(); n];
        for k in self.map.epsilon.clone() {
            match slack_norm {
                SlackNorm::SquaredL2 => diag.push((k, k, T::lit(2.0))),
                SlackNorm::L1 => q[k] = T::one(),
            }
        }
        self.problem.p = CscMatrix::from_triplets(n, n, &diag)?;
        self.problem.q = q;
        self.kernel_c = kernel_c;
        self.gamma = gamma;
        self.slack_norm = slack_norm;
        Ok(())
    }

    pub fn z_max(&self) -> T {
        self.ratios
            .iter()
            .flatten()
            .copied()
            .fold(T::zero(), T::max)
    }
}

struct RowBounds<T> {
    l: Vec<T>,
    u: Vec<T>,
}

impl<T: Copy> RowBounds<T> {
    fn push(&mut self, lo: T, hi: T) -> usize {
        self.l.push(lo);
        self.u.push(hi);
        self.l.len() - 1
    }

    fn len(&self) -> usize {
        self.l.len()
    }
}

fn check_observations<T: Scalar>(obs: &[Observation<'_, T>]) -> Result<()> {
    let first = obs
        .first()
        .ok_or_else(|| Error::Config("at least one observation is required".into()))?;
    let theta = first.network.classes().theta();
    for (k, o) in obs.iter().enumerate() {
        let net = o.network;
        if net.classes().theta() != theta {
            return Err(Error::Dimension(format!(
                "observation {k} uses a different class structure or theta"
            )));
        }
        if o.demands.class_count() != net.class_count() {
            return Err(Error::Dimension(format!(
                "observation {k}: demand classes do not match the network"
            )));
        }
        if o.flows.link_count() != net.link_count() || o.flows.class_count() != net.class_count() {
            return Err(Error::Dimension(format!(
                "observation {k}: flows do not match the network"
            )));
        }
        if !o.flows.is_nonnegative() {
            return Err(Error::Data(format!("observation {k}: negative flow")));
        }
        if let Some(v) = o.demands.max_node() {
            if v >= net.node_count() {
                return Err(Error::Data(format!(
                    "observation {k}: demand node {} out of range",
                    v + 1
                )));
            }
        }
        let unit = vec![T::one(); net.link_count()];
        for u in 0..net.class_count() {
            for (origin, dests) in o.demands.by_origin(u) {
                if dests.iter().all(|d| d.1 == T::zero()) {
                    continue;
                }
                let tree = shortest_path_tree(net, origin, &unit)?;
                for &(d, v) in &dests {
                    if v > T::zero() && !tree.is_reachable(d) {
                        return Err(Error::Unreachable {
                            class: u,
                            origin: origin + 1,
                            destination: d + 1,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn assemble_qp<T: Scalar>(
    observations: &[Observation<'_, T>],
    cfg: &EstimationConfig<T>,
) -> Result<AssembledQp<T>> {
    cfg.validate()?;
    check_observations(observations)?;
    let deg = cfg.degree;
    let kobs = observations.len();
    let beta = 0..deg + 1;
    let epsilon = beta.end..beta.end + kobs;

    // Columns of the y blocks.
    let mut y_blocks = Vec::new();
    let mut col = epsilon.end;
    for (k, o) in observations.iter().enumerate() {
        let net = o.network;
        let len = match cfg.restriction {
            DualRestriction::ClassCopy => net.node_count(),
            DualRestriction::Full => net.conceptual_node_count(),
        };
        for u in 0..net.class_count() {
            for (origin, dests) in o.demands.by_origin(u) {
                match cfg.grouping {
                    DualGrouping::OdPair => {
                        for (d, _) in dests {
                            y_blocks.push(YBlock {
                                observation: k,
                                class: u,
                                origin,
                                destination: Some(d),
                                start: col,
                                len,
                                nodes: net.node_count(),
                            });
                            col += len;
                        }
                    }
                    DualGrouping::Origin => {
                        y_blocks.push(YBlock {
                            observation: k,
                            class: u,
                            origin,
                            destination: None,
                            start: col,
                            len,
                            nodes: net.node_count(),
                        });
                        col += len;
                    }
                }
            }
        }
    }
    let nvars = col;
    let y = epsilon.end..nvars;
    let restriction = cfg.restriction;
    let ycol = |blk: &YBlock, class: usize, node: usize, nodes: usize| -> usize {
        match restriction {
            DualRestriction::ClassCopy => blk.start + node,
            DualRestriction::Full => blk.start + class * nodes + node,
        }
    };

    let mut trip: Vec<(usize, usize, T)> = Vec::new();
    let mut bounds = RowBounds {
        l: Vec::new(),
        u: Vec::new(),
    };

    let beta0_row = bounds.push(T::one(), T::one());
    trip.push((beta0_row, beta.start, T::one()));
    let eps_start = beta0_row + 1;
    for k in 0..kobs {
        let r = bounds.push(T::zero(), T::infinity());
        trip.push((r, epsilon.start + k, T::one()));
    }
    let epsilon_rows = eps_start..eps_start + kobs;

    let mut rows = Vec::with_capacity(kobs);
    let mut gap_scales = Vec::with_capacity(kobs);
    let mut time_scales = Vec::with_capacity(kobs);
    let mut all_ratios = Vec::with_capacity(kobs);
    let mut block_iter = 0usize;
    for (k, o) in observations.iter().enumerate() {
        let net = o.network;
        let nodes = net.node_count();
        let links = net.link_count();
        let classes = net.class_count();
        let (st, sx) = if cfg.normalize_gap {
            let mean_t0 = (0..links)
                .map(|i| net.physical().links[i].free_flow_time)
                .sum::<T>()
                / T::from_usize_lossy(links.max(1));
            let total = o.demands.total();
            (
                if mean_t0 > T::zero() {
                    T::one() / mean_t0
                } else {
                    T::one()
                },
                if total > T::zero() {
                    T::one() / total
                } else {
                    T::one()
                },
            )
        } else {
            (T::one(), T::one())
        };
        time_scales.push(st);
        gap_scales.push(st * sx);

        let ratios = congestion_ratios(o.flows, net)?;
        let powers: Vec<Vec<T>> = ratios.iter().map(|&z| compensated_powers(z, deg)).collect();

        // Dual feasibility: y[head] - y[tail] - t0_iu sum_j beta_j z_i^j <= 0.
        let blocks_k: Vec<YBlock> = y_blocks[block_iter..]
            .iter()
            .take_while(|b| b.observation == k)
            .cloned()
            .collect();
        block_iter += blocks_k.len();
        let dual_start = bounds.len();
        for blk in &blocks_k {
            let copies: Vec<usize> = match restriction {
                DualRestriction::ClassCopy => vec![blk.class],
                DualRestriction::Full => (0..classes).collect(),
            };
            for &cu in &copies {
                for i in 0..links {
                    let r = bounds.push(T::neg_infinity(), T::zero());
                    trip.push((r, ycol(blk, cu, net.head(i), nodes), T::one()));
                    trip.push((r, ycol(blk, cu, net.tail(i), nodes), -T::one()));
                    let t0 = st * net.free_flow_time(i, cu);
                    for j in 0..=deg {
                        let v = t0 * powers[i][j];
                        if v != T::zero() {
                            trip.push((r, beta.start + j, -v));
                        }
                    }
                }
            }
        }
        let dual = dual_start..bounds.len();

        // Gap: sum_i f(z_i) sum_u t0_iu x_iu - sum_w d_w (y_w[dest] - y_w[orig]) <= eps_k.
        let gap = bounds.push(T::neg_infinity(), T::zero());
        let weighted: Vec<T> = (0..links)
            .map(|i| {
                (0..classes)
                    .map(|cu| st * net.free_flow_time(i, cu) * sx * o.flows.get(i, cu))
                    .sum()
            })
            .collect();
        for j in 0..=deg {
            let v: T = (0..links).map(|i| powers[i][j] * weighted[i]).sum();
            if v != T::zero() {
                trip.push((gap, beta.start + j, v));
            }
        }
        trip.push((gap, epsilon.start + k, -T::one()));
        for blk in &blocks_k {
            let cu = blk.class;
            let dests: Vec<(usize, T)> = match blk.destination {
                Some(d) => vec![(d, o.demands.get(cu, blk.origin, d))],
                None => o
                    .demands
                    .pairs(cu)
                    .filter(|p| p.0 == blk.origin)
                    .map(|p| (p.1, p.2))
                    .collect(),
            };
            let mut total = T::zero();
            for (d, v) in dests {
                if v != T::zero() {
                    trip.push((gap, ycol(blk, cu, d, nodes), -sx * v));
                    total += v;
                }
            }
            if total != T::zero() {
                trip.push((gap, ycol(blk, cu, blk.origin, nodes), sx * total));
            }
        }

        // Monotonicity: sum_j beta_j (z_a^j - z_b^j) <= 0 for z_a < z_b.
        let pairs = match cfg.monotonicity {
            MonotonicityForm::Chain => monotonicity_chain(&ratios),
            MonotonicityForm::AllPairs => monotonicity_all_pairs(&ratios),
        };
        let mono_start = bounds.len();
        for (a, b) in pairs {
            let r = bounds.push(T::neg_infinity(), T::zero());
            for j in 1..=deg {
                let v = powers[a][j] - powers[b][j];
                if v != T::zero() {
                    trip.push((r, beta.start + j, v));
                }
            }
        }
        rows.push(ObservationRows {
            dual,
            gap,
            monotonicity: mono_start..bounds.len(),
        });
        all_ratios.push(ratios);
        debug!(
            "invvi: observation {k}: {} dual rows, {} monotonicity rows",
            rows[k].dual.len(),
            rows[k].monotonicity.len()
        );
    }

    let a = CscMatrix::from_triplets(bounds.len(), nvars, &trip)?;
    let problem = QpProblem::new(
        CscMatrix::zeros(nvars, nvars),
        vec![T::zero(); nvars],
        a,
        bounds.l,
        bounds.u,
    )?;
    let map = VariableMap {
        beta,
        epsilon,
        y,
        y_blocks,
        beta0_row,
        epsilon_rows,
        rows,
        restriction,
    };
    let mut out = AssembledQp {
        problem,
        map,
        degree: deg,
        gap_scales,
        time_scales,
        ratios: all_ratios,
        kernel_c: cfg.kernel_c,
        gamma: cfg.gamma,
        slack_norm: cfg.slack_norm,
    };
    out.set_objective(cfg.kernel_c, cfg.gamma, cfg.slack_norm)?;
    info!(
        "invvi: {} variables, {} rows, {} nonzeros",
        out.problem.num_vars(),
        out.problem.num_constraints(),
        out.problem.a.nnz()
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpReport<T> {
    pub status: QpStatus,
    pub primal_residual: T,
    pub dual_residual: T,
    pub iterations: usize,
    pub objective: T,
    pub polished: bool,
}

#[derive(Debug, Clone)]
pub struct EstimationResult<T> {
    /// Estimate with `beta_0` set to exactly 1.
    pub poly: PolynomialCost<T>,
    /// Coefficients as returned by the solver.
    pub beta_raw: Vec<T>,
    /// Slack per observation, original units.
    pub epsilons: Vec<T>,
    /// Slack per observation, normalized units (as in the QP).
    pub epsilons_scaled: Vec<T>,
    pub gap_scales: Vec<T>,
    /// Dual potentials in original time units, laid out as in [`VariableMap::y`].
    pub duals: Vec<T>,
    pub qp: QpReport<T>,
    pub gamma: T,
    pub slack_norm: SlackNorm,
    pub ratios: Vec<Vec<T>>,
    pub z_max: T,
}

impl<T: Scalar> EstimationResult<T> {
    pub fn degree(&self) -> usize {
        self.poly.degree()
    }

    /// `key = value` header, a `---` separator, then `j,beta` rows.
    pub fn write_report<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "degree = {}", self.degree())?;
        writeln!(w, "kernel_c = {}", self.poly.kernel_c())?;
        writeln!(w, "gamma = {}", self.gamma)?;
        writeln!(w, "slack_norm = {}", self.slack_norm.name())?;
        writeln!(w, "status = {}", self.qp.status)?;
        writeln!(w, "primal_residual = {:e}", self.qp.primal_residual)?;
        writeln!(w, "dual_residual = {:e}", self.qp.dual_residual)?;
        writeln!(w, "iterations = {}", self.qp.iterations)?;
        writeln!(w, "polished = {}", self.qp.polished)?;
        writeln!(w, "objective = {}", self.qp.objective)?;
        writeln!(w, "beta0_raw = {}", self.beta_raw[0])?;
        writeln!(w, "z_max = {}", self.z_max)?;
        for (k, (e, s)) in self.epsilons.iter().zip(&self.gap_scales).enumerate() {
            writeln!(w, "epsilon_{k} = {e}")?;
            writeln!(w, "gap_scale_{k} = {s}")?;
        }
        writeln!(w, "---")?;
        writeln!(w, "j,beta")?;
        for (j, b) in self.poly.beta().iter().enumerate() {
            writeln!(w, "{j},{b}")?;
        }
        Ok(())
    }
}

pub fn solve_assembled<T: Scalar>(
    asm: &AssembledQp<T>,
    settings: &Settings<T>,
) -> Result<EstimationResult<T>> {
    let sol = solve_with(&asm.problem, settings)?;
    info!(
        "invvi: solver {} after {} iterations (primal {:e}, dual {:e}, polished {})",
        sol.status, sol.iterations, sol.primal_residual, sol.dual_residual, sol.polished
    );
    if sol.status != QpStatus::Optimal {
        return Err(Error::Solver {
            status: sol.status,
            iterations: sol.iterations,
            primal: sol.primal_residual.as_f64(),
            dual: sol.dual_residual.as_f64(),
        });
    }
    let map = &asm.map;
    let beta_raw: Vec<T> = sol.x[map.beta.clone()].to_vec();
    let mut beta = beta_raw.clone();
    beta[0] = T::one();
    let poly = PolynomialCost::new(beta, asm.kernel_c)?;
    let epsilons_scaled: Vec<T> = sol.x[map.epsilon.clone()].to_vec();
    let epsilons = epsilons_scaled
        .iter()
        .zip(&asm.gap_scales)
        .map(|(&e, &s)| e / s)
        .collect();
    let mut duals = sol.x[map.y.clone()].to_vec();
    for blk in &map.y_blocks {
        let s = asm.time_scales[blk.observation];
        for v in &mut duals[blk.start - map.y.start..blk.start - map.y.start + blk.len] {
            *v /= s;
        }
    }
    Ok(EstimationResult {
        poly,
        beta_raw,
        epsilons,
        epsilons_scaled,
        gap_scales: asm.gap_scales.clone(),
        duals,
        qp: QpReport {
            status: sol.status,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            iterations: sol.iterations,
            objective: sol.objective,
            polished: sol.polished,
        },
        gamma: asm.gamma,
        slack_norm: asm.slack_norm,
        ratios: asm.ratios.clone(),
        z_max: asm.z_max(),
    })
}

pub fn estimate<T: Scalar>(
    observations: &[Observation<'_, T>],
    cfg: &EstimationConfig<T>,
) -> Result<EstimationResult<T>> {
    let asm = assemble_qp(observations, cfg)?;
    solve_assembled(&asm, &cfg.solver)
}
