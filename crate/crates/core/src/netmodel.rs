//! Multi-class network as disjoint copies of the physical graph, per-class
//! demands, link flows, shortest paths and flow-conservation checks.
//!
//! Node indices are 0-based here (TNTP node `k` is index `k - 1`). In the
//! conceptual network copy `u` holds node `u * |V| + i` and link `u * |A| + i`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use wardrop_qp::Scalar;

use crate::error::{Error, Result};
use crate::tntp_io::{DemandTable, NetworkSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct ClassConfig<T> {
    theta: Vec<T>,
    t0_multiplier: Vec<T>,
    demand_share: Vec<T>,
}

impl<T: Scalar> ClassConfig<T> {
    pub fn new(theta: Vec<T>, t0_multiplier: Vec<T>, demand_share: Vec<T>) -> Result<Self> {
        let k = theta.len();
        if k == 0 {
            return Err(Error::Config("at least one class is required".into()));
        }
        if t0_multiplier.len() != k || demand_share.len() != k {
            return Err(Error::Config(format!(
                "theta has {k} entries, t0 multipliers {}, demand shares {}",
                t0_multiplier.len(),
                demand_share.len()
            )));
        }
        if theta.iter().any(|t| !(*t >= T::zero()) || !t.is_finite()) {
            return Err(Error::Config(
                "theta entries must be finite and >= 0".into(),
            ));
        }
        if t0_multiplier
            .iter()
            .any(|t| !(*t >= T::zero()) || !t.is_finite())
        {
            return Err(Error::Config(
                "t0 multipliers must be finite and >= 0".into(),
            ));
        }
        if demand_share.iter().any(|s| !(*s >= T::zero())) {
            return Err(Error::Config("demand shares must be >= 0".into()));
        }
        let sum: T = demand_share.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(4 * k));
        if (sum - T::one()).abs() > tol {
            return Err(Error::Config(format!("demand shares sum to {sum}, not 1")));
        }
        Ok(Self {
            theta,
            t0_multiplier,
            demand_share,
        })
    }

    pub fn single() -> Self {
        Self {
            theta: vec![T::one()],
            t0_multiplier: vec![T::one()],
            demand_share: vec![T::one()],
        }
    }

    /// Cars and trucks: weights (1, 2), free-flow multipliers (1, 1.1), shares (0.8, 0.2).
    pub fn cars_and_trucks() -> Self {
        Self {
            theta: vec![T::one(), T::lit(2.0)],
            t0_multiplier: vec![T::one(), T::lit(1.1)],
            demand_share: vec![T::lit(0.8), T::lit(0.2)],
        }
    }

    pub fn class_count(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    pub fn t0_multiplier(&self) -> &[T] {
        &self.t0_multiplier
    }

    pub fn demand_share(&self) -> &[T] {
        &self.demand_share
    }
}

#[derive(Debug, Clone)]
pub struct MulticlassNetwork<T> {
    physical: NetworkSpec<T>,
    classes: ClassConfig<T>,
    tail: Vec<usize>,
    head: Vec<usize>,
    /// Forward star: links leaving node `v` are `out_links[out_start[v]..out_start[v + 1]]`, ascending.
    out_start: Vec<usize>,
    out_links: Vec<usize>,
}

impl<T: Scalar> MulticlassNetwork<T> {
    pub fn new(physical: NetworkSpec<T>, classes: ClassConfig<T>) -> Result<Self> {
        let n = physical.node_count;
        let mut tail = Vec::with_capacity(physical.links.len());
        let mut head = Vec::with_capacity(physical.links.len());
        for (i, l) in physical.links.iter().enumerate() {
            if l.from_node == 0 || l.from_node > n || l.to_node == 0 || l.to_node > n {
                return Err(Error::Data(format!("link {i} endpoint outside 1..={n}")));
            }
            if !(l.capacity > T::zero()) {
                return Err(Error::Data(format!("link {i} capacity must be positive")));
            }
            if !(l.free_flow_time >= T::zero()) {
                return Err(Error::Data(format!("link {i} free flow time must be >= 0")));
            }
            tail.push(l.from_node - 1);
            head.push(l.to_node - 1);
        }
        let mut out_start = vec![0usize; n + 1];
        for &t in &tail {
            out_start[t + 1] += 1;
        }
        for v in 0..n {
            out_start[v + 1] += out_start[v];
        }
        let mut next = out_start.clone();
        let mut out_links = vec![0usize; tail.len()];
        for (i, &t) in tail.iter().enumerate() {
            out_links[next[t]] = i;
            next[t] += 1;
        }
        Ok(Self {
            physical,
            classes,
            tail,
            head,
            out_start,
            out_links,
        })
    }

    pub fn physical(&self) -> &NetworkSpec<T> {
        &self.physical
    }

    pub fn classes(&self) -> &ClassConfig<T> {
        &self.classes
    }

    pub fn node_count(&self) -> usize {
        self.physical.node_count
    }

    pub fn zone_count(&self) -> usize {
        self.physical.zone_count
    }

    pub fn link_count(&self) -> usize {
        self.tail.len()
    }

    pub fn class_count(&self) -> usize {
        self.classes.class_count()
    }

    pub fn conceptual_node_count(&self) -> usize {
        self.class_count() * self.node_count()
    }

    pub fn conceptual_link_count(&self) -> usize {
        self.class_count() * self.link_count()
    }

    pub fn conceptual_node(&self, node: usize, class: usize) -> usize {
        class * self.node_count() + node
    }

    pub fn conceptual_link(&self, link: usize, class: usize) -> usize {
        class * self.link_count() + link
    }

    /// Inverse of [`Self::conceptual_link`]: `(physical link, class)`.
    pub fn split_conceptual_link(&self, a: usize) -> (usize, usize) {
        (a % self.link_count(), a / self.link_count())
    }

    /// Endpoints of a conceptual link as conceptual node indices.
    pub fn conceptual_endpoints(&self, a: usize) -> (usize, usize) {
        let (i, u) = self.split_conceptual_link(a);
        (
            self.conceptual_node(self.tail[i], u),
            self.conceptual_node(self.head[i], u),
        )
    }

    pub fn tail(&self, link: usize) -> usize {
        self.tail[link]
    }

    pub fn head(&self, link: usize) -> usize {
        self.head[link]
    }

    pub fn out_links(&self, node: usize) -> &[usize] {
        &self.out_links[self.out_start[node]..self.out_start[node + 1]]
    }

    pub fn capacity(&self, link: usize) -> T {
        self.physical.links[link].capacity
    }

    /// `t0_multiplier[class] * t0_link`.
    pub fn free_flow_time(&self, link: usize, class: usize) -> T {
        self.classes.t0_multiplier[class] * self.physical.links[link].free_flow_time
    }

    /// Links of copy `class` as `(tail, head, free-flow time)` in physical node numbering.
    pub fn copy_links(&self, class: usize) -> Vec<(usize, usize, T)> {
        (0..self.link_count())
            .map(|i| (self.tail[i], self.head[i], self.free_flow_time(i, class)))
            .collect()
    }
}

pub fn build_multiclass<T: Scalar>(
    net: NetworkSpec<T>,
    classes: ClassConfig<T>,
) -> Result<MulticlassNetwork<T>> {
    MulticlassNetwork::new(net, classes)
}

/// Per-class OD demands, keyed by 0-based (origin, destination) nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandSet<T> {
    classes: Vec<BTreeMap<(usize, usize), T>>,
}

impl<T: Scalar> DemandSet<T> {
    pub fn new(class_count: usize) -> Self {
        Self {
            classes: vec![BTreeMap::new(); class_count],
        }
    }

    pub fn insert(
        &mut self,
        class: usize,
        origin: usize,
        destination: usize,
        demand: T,
    ) -> Result<()> {
        if class >= self.classes.len() {
            return Err(Error::Dimension(format!(
                "class {class} of {}",
                self.classes.len()
            )));
        }
        if !(demand >= T::zero()) || !demand.is_finite() {
            return Err(Error::Data(format!(
                "demand {demand} must be finite and >= 0"
            )));
        }
        if origin == destination {
            return Err(Error::Data(format!(
                "intrazonal demand at node {}",
                origin + 1
            )));
        }
        self.classes[class].insert((origin, destination), demand);
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn get(&self, class: usize, origin: usize, destination: usize) -> T {
        self.classes[class]
            .get(&(origin, destination))
            .copied()
            .unwrap_or(T::zero())
    }

    /// `(origin, destination, demand)` for one class, ascending, zero entries included.
    pub fn pairs(&self, class: usize) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.classes[class].iter().map(|(&(o, d), &v)| (o, d, v))
    }

    pub fn pair_count(&self) -> usize {
        self.classes.iter().map(|c| c.len()).sum()
    }

    /// Origins of one class in ascending order with their `(destination, demand)` lists.
    pub fn by_origin(&self, class: usize) -> Vec<(usize, Vec<(usize, T)>)> {
        let mut out: Vec<(usize, Vec<(usize, T)>)> = Vec::new();
        for (o, d, v) in self.pairs(class) {
            match out.last_mut() {
                Some((last, list)) if *last == o => list.push((d, v)),
                _ => out.push((o, vec![(d, v)])),
            }
        }
        out
    }

    pub fn total(&self) -> T {
        self.classes.iter().flat_map(|c| c.values().copied()).sum()
    }

    pub fn max_demand(&self) -> T {
        self.classes
            .iter()
            .flat_map(|c| c.values().copied())
            .fold(T::zero(), T::max)
    }

    /// Largest node index referenced, if any.
    pub fn max_node(&self) -> Option<usize> {
        self.classes
            .iter()
            .flat_map(|c| c.keys().map(|&(o, d)| o.max(d)))
            .max()
    }
}

/// `demand_u = share_u * total` for every pair; zero pairs are kept.
pub fn split_demand<T: Scalar>(
    total: &DemandTable<T>,
    classes: &ClassConfig<T>,
) -> Result<DemandSet<T>> {
    let shares = classes.demand_share();
    let sum: T = shares.iter().copied().sum();
    let tol = T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(4 * shares.len()));
    if (sum - T::one()).abs() > tol || shares.iter().any(|s| !(*s >= T::zero())) {
        return Err(Error::Config(format!("demand shares sum to {sum}, not 1")));
    }
    let mut set = DemandSet::new(shares.len());
    for (o, d, v) in total.iter() {
        for (u, &s) in shares.iter().enumerate() {
            set.insert(u, o - 1, d - 1, s * v)?;
        }
    }
    Ok(set)
}

/// Flows `x_iu`, stored link-major so the class vector of a link is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState<T> {
    links: usize,
    classes: usize,
    x: Vec<T>,
}

impl<T: Scalar> FlowState<T> {
    pub fn zeros(links: usize, classes: usize) -> Self {
        Self {
            links,
            classes,
            x: vec![T::zero(); links * classes],
        }
    }

    pub fn from_vec(links: usize, classes: usize, x: Vec<T>) -> Result<Self> {
        if x.len() != links * classes {
            return Err(Error::Dimension(format!(
                "{} values for {links} x {classes}",
                x.len()
            )));
        }
        if x.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::Data("flows must be finite and >= 0".into()));
        }
        Ok(Self { links, classes, x })
    }

    pub fn link_count(&self) -> usize {
        self.links
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn get(&self, link: usize, class: usize) -> T {
        self.x[link * self.classes + class]
    }

    pub fn set(&mut self, link: usize, class: usize, v: T) {
        self.x[link * self.classes + class] = v;
    }

    pub fn add(&mut self, link: usize, class: usize, v: T) {
        self.x[link * self.classes + class] += v;
    }

    /// Class flows on one link.
    pub fn link(&self, link: usize) -> &[T] {
        &self.x[link * self.classes..(link + 1) * self.classes]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.x
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.x
    }

    /// Flows of one class on every link.
    pub fn class_flows(&self, class: usize) -> Vec<T> {
        (0..self.links).map(|i| self.get(i, class)).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.x.iter().all(|v| *v >= T::zero())
    }
}

#[derive(Debug, Clone)]
pub struct ShortestPathTree<T> {
    pub origin: usize,
    /// `T::infinity()` for unreachable nodes.
    pub dist: Vec<T>,
    pub pred_link: Vec<Option<usize>>,
    /// Reachable nodes in the order they were settled.
    pub settle_order: Vec<usize>,
}

impl<T: Scalar> ShortestPathTree<T> {
    pub fn is_reachable(&self, node: usize) -> bool {
        self.dist[node].is_finite()
    }

    /// Links of the tree path to `node`, from the origin outwards.
    pub fn path_links<U: Scalar>(
        &self,
        net: &MulticlassNetwork<U>,
        node: usize,
    ) -> Option<Vec<usize>> {
        if !self.is_reachable(node) {
            return None;
        }
        let mut links = Vec::new();
        let mut v = node;
        while let Some(a) = self.pred_link[v] {
            links.push(a);
            v = net.tail(a);
        }
        links.reverse();
        Some(links)
    }
}

#[derive(Clone, Copy)]
struct HeapItem<T> {
    dist: T,
    node: usize,
}

impl<T: Scalar> PartialEq for HeapItem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for HeapItem<T> {}

impl<T: Scalar> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> Ord for HeapItem<T> {
    // Reversed: BinaryHeap pops the smallest (dist, node).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Dijkstra on the physical topology with one copy's link costs.
///
/// Ties between equal-cost predecessors go to the smaller predecessor node,
/// then to the smaller link index.
pub fn shortest_path_tree<T: Scalar>(
    net: &MulticlassNetwork<T>,
    origin: usize,
    costs: &[T],
) -> Result<ShortestPathTree<T>> {
    let n = net.node_count();
    if origin >= n {
        return Err(Error::Data(format!(
            "origin {} outside 1..={n}",
            origin + 1
        )));
    }
    if costs.len() != net.link_count() {
        return Err(Error::Dimension(format!(
            "{} costs for {} links",
            costs.len(),
            net.link_count()
        )));
    }
    if let Some(k) = costs
        .iter()
        .position(|c| !(*c >= T::zero()) || !c.is_finite())
    {
        return Err(Error::NegativeCost {
            link: k,
            value: costs[k].as_f64(),
        });
    }
    let mut dist = vec![T::infinity(); n];
    let mut pred_link: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::new();
    dist[origin] = T::zero();
    heap.push(HeapItem {
        dist: T::zero(),
        node: origin,
    });
    while let Some(HeapItem { dist: d, node: a }) = heap.pop() {
        if settled[a] || d > dist[a] {
            continue;
        }
        settled[a] = true;
        order.push(a);
        for &link in net.out_links(a) {
            let b = net.head(link);
            if settled[b] {
                continue;
            }
            let nd = d + costs[link];
            if nd < dist[b] {
                dist[b] = nd;
                pred_link[b] = Some(link);
                heap.push(HeapItem { dist: nd, node: b });
            } else if nd == dist[b] {
                let better = match pred_link[b] {
                    None => true,
                    Some(p) => {
                        let pa = net.tail(p);
                        a < pa || (a == pa && link < p)
                    }
                };
                if better {
                    pred_link[b] = Some(link);
                }
            }
        }
    }
    Ok(ShortestPathTree {
        origin,
        dist,
        pred_link,
        settle_order: order,
    })
}

/// Link flows of one class generated by a single origin.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginFlows<T> {
    pub class: usize,
    pub origin: usize,
    pub flows: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport<T> {
    /// Max over origins (or OD pairs) of `||N x - d||_inf`.
    pub conservation: T,
    /// Most negative flow entry, 0 if none.
    pub min_flow: T,
    /// `||sum of origin flows - aggregate||_inf` when an aggregate is supplied.
    pub aggregate_mismatch: Option<T>,
}

/// `max_v |inflow(v) - outflow(v) - d_v|` with `d = -sum(demand)` at the
/// origin and `+demand` at each destination.
pub fn node_balance_residual<T: Scalar>(
    net: &MulticlassNetwork<T>,
    link_flows: &[T],
    origin: usize,
    destinations: &[(usize, T)],
) -> Result<T> {
    if link_flows.len() != net.link_count() {
        return Err(Error::Dimension(format!(
            "{} link flows for {} links",
            link_flows.len(),
            net.link_count()
        )));
    }
    let mut bal = vec![T::zero(); net.node_count()];
    for (i, &x) in link_flows.iter().enumerate() {
        bal[net.head(i)] += x;
        bal[net.tail(i)] -= x;
    }
    for &(d, v) in destinations {
        bal[d] -= v;
        bal[origin] += v;
    }
    Ok(bal.iter().fold(T::zero(), |m, v| m.max(v.abs())))
}

/// Conservation check per origin, flow sign check and optional aggregate check.
pub fn feasibility_residual<T: Scalar>(
    net: &MulticlassNetwork<T>,
    per_origin: &[OriginFlows<T>],
    demands: &DemandSet<T>,
    aggregate: Option<&FlowState<T>>,
) -> Result<FeasibilityReport<T>> {
    if demands.class_count() != net.class_count() {
        return Err(Error::Dimension(format!(
            "{} demand classes for {} network classes",
            demands.class_count(),
            net.class_count()
        )));
    }
    let mut conservation = T::zero();
    let mut min_flow = T::zero();
    let mut covered = vec![vec![false; net.node_count()]; net.class_count()];
    for of in per_origin {
        if of.class >= net.class_count() || of.origin >= net.node_count() {
            return Err(Error::Dimension(format!(
                "origin flows for class {} origin {}",
                of.class, of.origin
            )));
        }
        covered[of.class][of.origin] = true;
        let dests: Vec<(usize, T)> = demands
            .pairs(of.class)
            .filter(|&(o, _, _)| o == of.origin)
            .map(|(_, d, v)| (d, v))
            .collect();
        conservation = conservation.max(node_balance_residual(net, &of.flows, of.origin, &dests)?);
        min_flow = of.flows.iter().copied().fold(min_flow, T::min);
    }
    for u in 0..net.class_count() {
        for (o, dests) in demands.by_origin(u) {
            let total: T = dests.iter().map(|d| d.1).sum();
            if total > T::zero() && !covered[u][o] {
                conservation = conservation.max(total);
            }
        }
    }
    let aggregate_mismatch = match aggregate {
        None => None,
        Some(agg) => {
            if agg.link_count() != net.link_count() || agg.class_count() != net.class_count() {
                return Err(Error::Dimension(
                    "aggregate flows do not match the network".into(),
                ));
            }
            let mut sum = FlowState::zeros(net.link_count(), net.class_count());
            for of in per_origin {
                for (i, &x) in of.flows.iter().enumerate() {
                    sum.add(i, of.class, x);
                }
            }
            Some(
                sum.as_slice()
                    .iter()
                    .zip(agg.as_slice())
                    .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())),
            )
        }
    };
    Ok(FeasibilityReport {
        conservation,
        min_flow,
        aggregate_mismatch,
    })
}

/// Conservation of the aggregate class flows against the summed demand
/// vectors; necessary for feasibility and available without a per-origin split.
pub fn aggregate_balance_residual<T: Scalar>(
    net: &MulticlassNetwork<T>,
    flows: &FlowState<T>,
    demands: &DemandSet<T>,
) -> Result<T> {
    if flows.link_count() != net.link_count() || flows.class_count() != net.class_count() {
        return Err(Error::Dimension("flows do not match the network".into()));
    }
    let mut worst = T::zero();
    for u in 0..net.class_count() {
        let mut bal = vec![T::zero(); net.node_count()];
        for i in 0..net.link_count() {
            let x = flows.get(i, u);
            bal[net.head(i)] += x;
            bal[net.tail(i)] -= x;
        }
        for (o, d, v) in demands.pairs(u) {
            bal[d] -= v;
            bal[o] += v;
        }
        worst = bal.iter().fold(worst, |m, v| m.max(v.abs()));
    }
    Ok(worst)
}
