//! Method of successive averages with all-or-nothing loading, and the
//! variational-inequality gap of a flow pattern.

use log::debug;
use rayon::prelude::*;
use wardrop_qp::Scalar;

use crate::cost_bpr::{eval_latency, LatencyFn, LinkCosts};
use crate::error::{Error, Result};
use crate::netmodel::{
    aggregate_balance_residual, shortest_path_tree, DemandSet, FlowState, MulticlassNetwork,
    OriginFlows,
};

#[derive(Debug, Clone, PartialEq)]
pub struct MsaConfig<T> {
    /// Stop once the relative gap falls below this.
    pub epsilon_rg: T,
    pub max_iters: usize,
    /// Keep averaged flows per (class, origin) for conservation audits.
    pub track_per_origin: bool,
}

impl<T: Scalar> Default for MsaConfig<T> {
    fn default() -> Self {
        Self {
            epsilon_rg: T::lit(1e-6),
            max_iters: 1000,
            track_per_origin: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsaStats<T> {
    pub iterations: usize,
    pub final_rg: T,
    pub rg_trace: Vec<T>,
    /// Gap `t(x)'x - min_y t(x)'y` at the returned flows.
    pub vi_epsilon: T,
    /// `t(x)'x` at the returned flows.
    pub total_cost: T,
}

#[derive(Debug, Clone)]
pub struct MsaOutput<T> {
    pub flows: FlowState<T>,
    pub per_origin: Option<Vec<OriginFlows<T>>>,
    pub stats: MsaStats<T>,
}

struct Job<T> {
    class: usize,
    origin: usize,
    dests: Vec<(usize, T)>,
}

/// Origins with positive demand, ordered by (class, origin).
fn jobs<T: Scalar>(demands: &DemandSet<T>) -> Vec<Job<T>> {
    let mut out = Vec::new();
    for u in 0..demands.class_count() {
        for (o, dests) in demands.by_origin(u) {
            let dests: Vec<(usize, T)> = dests.into_iter().filter(|d| d.1 > T::zero()).collect();
            if !dests.is_empty() {
                out.push(Job {
                    class: u,
                    origin: o,
                    dests,
                });
            }
        }
    }
    out
}

fn check_inputs<T: Scalar>(net: &MulticlassNetwork<T>, demands: &DemandSet<T>) -> Result<()> {
    if demands.class_count() != net.class_count() {
        return Err(Error::Dimension(format!(
            "{} demand classes for {} network classes",
            demands.class_count(),
            net.class_count()
        )));
    }
    if let Some(v) = demands.max_node() {
        if v >= net.node_count() {
            return Err(Error::Data(format!(
                "demand references node {} of {}",
                v + 1,
                net.node_count()
            )));
        }
    }
    Ok(())
}

/// Loads one origin's demands onto its shortest-path tree, pushing node
/// loads towards the origin in reverse settle order.
fn load_origin<T: Scalar>(net: &MulticlassNetwork<T>, job: &Job<T>, costs: &[T]) -> Result<Vec<T>> {
    let tree = shortest_path_tree(net, job.origin, costs)?;
    let mut load = vec![T::zero(); net.node_count()];
    for &(d, v) in &job.dests {
        if !tree.is_reachable(d) {
            return Err(Error::Unreachable {
                class: job.class,
                origin: job.origin + 1,
                destination: d + 1,
            });
        }
        load[d] += v;
    }
    let mut flows = vec![T::zero(); net.link_count()];
    for &v in tree.settle_order.iter().rev() {
        if let Some(a) = tree.pred_link[v] {
            let l = load[v];
            if l != T::zero() {
                flows[a] += l;
                load[net.tail(a)] += l;
            }
        }
    }
    Ok(flows)
}

fn load_all<T: Scalar>(
    net: &MulticlassNetwork<T>,
    jobs: &[Job<T>],
    costs: &LinkCosts<T>,
) -> Result<Vec<Vec<T>>> {
    jobs.par_iter()
        .map(|job| load_origin(net, job, costs.class(job.class)))
        .collect()
}

fn aggregate<T: Scalar>(
    net: &MulticlassNetwork<T>,
    jobs: &[Job<T>],
    loads: &[Vec<T>],
) -> FlowState<T> {
    let mut agg = FlowState::zeros(net.link_count(), net.class_count());
    for (job, flows) in jobs.iter().zip(loads) {
        for (i, &x) in flows.iter().enumerate() {
            agg.add(i, job.class, x);
        }
    }
    agg
}

pub fn all_or_nothing<T: Scalar>(
    net: &MulticlassNetwork<T>,
    demands: &DemandSet<T>,
    costs: &LinkCosts<T>,
) -> Result<FlowState<T>> {
    check_inputs(net, demands)?;
    let jobs = jobs(demands);
    let loads = load_all(net, &jobs, costs)?;
    Ok(aggregate(net, &jobs, &loads))
}

/// As [`all_or_nothing`], also returning the flows of every loaded origin.
pub fn all_or_nothing_by_origin<T: Scalar>(
    net: &MulticlassNetwork<T>,
    demands: &DemandSet<T>,
    costs: &LinkCosts<T>,
) -> Result<(FlowState<T>, Vec<OriginFlows<T>>)> {
    check_inputs(net, demands)?;
    let jobs = jobs(demands);
    let loads = load_all(net, &jobs, costs)?;
    let agg = aggregate(net, &jobs, &loads);
    let per_origin = jobs
        .iter()
        .zip(loads)
        .map(|(j, flows)| OriginFlows {
            class: j.class,
            origin: j.origin,
            flows,
        })
        .collect();
    Ok((agg, per_origin))
}

fn relative_gap<T: Scalar>(prev: &[T], next: &[T]) -> T {
    let mut num = T::zero();
    let mut den = T::zero();
    for (&a, &b) in prev.iter().zip(next) {
        num += (b - a) * (b - a);
        den += b * b;
    }
    if den == T::zero() {
        // 0/0 with zero demand, or a jump back to zero flows.
        if num == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        (num / den).sqrt()
    }
}

fn average_into<T: Scalar>(x: &mut [T], y: &[T], lambda: T) {
    for (xi, &yi) in x.iter_mut().zip(y) {
        *xi += lambda * (yi - *xi);
    }
}

pub fn msa_solve<T: Scalar>(
    net: &MulticlassNetwork<T>,
    demands: &DemandSet<T>,
    f: &LatencyFn<T>,
    cfg: &MsaConfig<T>,
) -> Result<MsaOutput<T>> {
    msa_run(net, demands, f, cfg, |_, _, _| {})
}

/// [`msa_solve`] calling `observer(l, y_l, x_l)` after every update.
pub fn msa_run<T, F>(
    net: &MulticlassNetwork<T>,
    demands: &DemandSet<T>,
    f: &LatencyFn<T>,
    cfg: &MsaConfig<T>,
    mut observer: F,
) -> Result<MsaOutput<T>>
where
    T: Scalar,
    F: FnMut(usize, &FlowState<T>, &FlowState<T>),
{
    if !(cfg.epsilon_rg > T::zero()) {
        return Err(Error::Config(format!(
            "relative gap threshold must be > 0, got {}",
            cfg.epsilon_rg
        )));
    }
    if cfg.max_iters == 0 {
        return Err(Error::Config("MSA needs at least one iteration".into()));
    }
    check_inputs(net, demands)?;
    let jobs = jobs(demands);
    let mut x = FlowState::zeros(net.link_count(), net.class_count());
    let mut per_origin: Option<Vec<OriginFlows<T>>> = cfg.track_per_origin.then(|| {
        jobs.iter()
            .map(|j| OriginFlows {
                class: j.class,
                origin: j.origin,
                flows: vec![T::zero(); net.link_count()],
            })
            .collect()
    });

    if jobs.is_empty() {
        let stats = MsaStats {
            iterations: 1,
            final_rg: T::zero(),
            rg_trace: vec![T::zero()],
            vi_epsilon: T::zero(),
            total_cost: T::zero(),
        };
        return Ok(MsaOutput {
            flows: x,
            per_origin,
            stats,
        });
    }

    let mut trace = Vec::new();
    let mut prev = x.as_slice().to_vec();
    let mut l = 0;
    while l < cfg.max_iters {
        l += 1;
        let costs = eval_latency(&x, net, f)?;
        let loads = load_all(net, &jobs, &costs)?;
        let y = aggregate(net, &jobs, &loads);
        let lambda = T::one() / T::from_usize_lossy(l);
        prev.copy_from_slice(x.as_slice());
        average_into(x.as_mut_slice(), y.as_slice(), lambda);
        if let Some(po) = per_origin.as_mut() {
            for (of, load) in po.iter_mut().zip(&loads) {
                average_into(&mut of.flows, load, lambda);
            }
        }
        let rg = relative_gap(&prev, x.as_slice());
        trace.push(rg);
        observer(l, &y, &x);
        if l % 100 == 0 {
            debug!("msa: iteration {l}, relative gap {rg:e}");
        }
        if rg < cfg.epsilon_rg {
            break;
        }
    }
    let costs = eval_latency(&x, net, f)?;
    let y = aggregate(net, &jobs, &load_all(net, &jobs, &costs)?);
    let total_cost = costs.dot(&x);
    let vi = (total_cost - costs.dot(&y)).max(T::zero());
    let stats = MsaStats {
        iterations: l,
        final_rg: *trace.last().expect("at least one iteration"),
        rg_trace: trace,
        vi_epsilon: vi,
        total_cost,
    };
    Ok(MsaOutput {
        flows: x,
        per_origin,
        stats,
    })
}

/// Smallest `eps` with `t(x)'(y - x) >= -eps` for every feasible `y`, found
/// by all-or-nothing loading under the frozen costs `t(x)`.
pub fn vi_epsilon<T: Scalar>(
    flows: &FlowState<T>,
    net: &MulticlassNetwork<T>,
    demands: &DemandSet<T>,
    f: &LatencyFn<T>,
) -> Result<T> {
    check_inputs(net, demands)?;
    let residual = aggregate_balance_residual(net, flows, demands)?;
    let tol = T::epsilon().sqrt() * T::one().max(demands.total());
    if residual > tol {
        return Err(Error::Infeasible(residual.as_f64()));
    }
    if flows.as_slice().iter().any(|v| *v < T::zero()) {
        return Err(Error::Data("negative flow".into()));
    }
    let costs = eval_latency(flows, net, f)?;
    let target = all_or_nothing(net, demands, &costs)?;
    Ok((costs.dot(flows) - costs.dot(&target)).max(T::zero()))
}
