#![allow(dead_code)]

use std::path::PathBuf;

use wardrop_core::{
    build_multiclass, msa_solve, parse_network_str, parse_trips_str, ClassConfig, DemandSet,
    DemandTable, FlowState, GroundTruth, LatencyFn, LinkSpec, MsaConfig, MulticlassNetwork,
    NetworkSpec, Observation,
};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join("SiouxFalls")
}

pub fn sioux_falls_text() -> (String, String) {
    let d = data_dir();
    (
        std::fs::read_to_string(d.join("SiouxFalls_net.tntp")).unwrap(),
        std::fs::read_to_string(d.join("SiouxFalls_trips.tntp")).unwrap(),
    )
}

pub fn sioux_falls() -> (NetworkSpec<f64>, DemandTable<f64>) {
    let (n, t) = sioux_falls_text();
    (parse_network_str(&n).unwrap(), parse_trips_str(&t).unwrap())
}

/// Links as `(from, to, capacity, t0)` with 0-based nodes.
pub fn spec(nodes: usize, links: &[(usize, usize, f64, f64)]) -> NetworkSpec<f64> {
    NetworkSpec {
        node_count: nodes,
        zone_count: nodes,
        first_thru_node: None,
        links: links
            .iter()
            .map(|&(a, b, cap, t0)| LinkSpec {
                from_node: a + 1,
                to_node: b + 1,
                capacity: cap,
                free_flow_time: t0,
            })
            .collect(),
    }
}

pub fn single_class(nodes: usize, links: &[(usize, usize, f64, f64)]) -> MulticlassNetwork<f64> {
    build_multiclass(spec(nodes, links), ClassConfig::single()).unwrap()
}

/// `(class, origin, destination, demand)`, 0-based.
pub fn demands(classes: usize, entries: &[(usize, usize, usize, f64)]) -> DemandSet<f64> {
    let mut d = DemandSet::new(classes);
    for &(u, o, t, v) in entries {
        d.insert(u, o, t, v).unwrap();
    }
    d
}

/// Ring `0 -> 1 -> ... -> n-1 -> 0` plus extra links; every node reaches every other.
pub fn ring_plus(
    nodes: usize,
    extra: &[(usize, usize, f64, f64)],
) -> Vec<(usize, usize, f64, f64)> {
    let mut links: Vec<_> = (0..nodes)
        .map(|i| (i, (i + 1) % nodes, 2.0 + i as f64, 1.0 + 0.25 * i as f64))
        .collect();
    links.extend(extra.iter().copied().filter(|l| l.0 != l.1));
    links
}

/// Independent Bellman-Ford distances, `None` for unreachable nodes.
pub fn bellman_ford(
    nodes: usize,
    links: &[(usize, usize)],
    costs: &[f64],
    origin: usize,
) -> Vec<Option<f64>> {
    let mut d = vec![None; nodes];
    d[origin] = Some(0.0);
    for _ in 0..nodes {
        for (i, &(a, b)) in links.iter().enumerate() {
            if let Some(da) = d[a] {
                let c = da + costs[i];
                if d[b].is_none_or(|db| c < db) {
                    d[b] = Some(c);
                }
            }
        }
    }
    d
}

/// Root of a continuous increasing `g` on `[lo, hi]` by bisection.
pub fn bisect(mut lo: f64, mut hi: f64, g: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub struct Instance {
    pub net: MulticlassNetwork<f64>,
    pub dem: DemandSet<f64>,
    pub flows: FlowState<f64>,
}

impl Instance {
    pub fn obs(&self) -> Observation<'_, f64> {
        Observation {
            network: &self.net,
            demands: &self.dem,
            flows: &self.flows,
        }
    }
}

pub fn equilibrium(
    nodes: usize,
    links: &[(usize, usize, f64, f64)],
    classes: ClassConfig<f64>,
    od: &[(usize, usize, usize, f64)],
    iters: usize,
) -> Instance {
    let net = build_multiclass(spec(nodes, links), classes.clone()).unwrap();
    let dem = demands(classes.class_count(), od);
    let cfg = MsaConfig {
        epsilon_rg: 1e-12,
        max_iters: iters,
        track_per_origin: false,
    };
    let flows = msa_solve(&net, &dem, &LatencyFn::Truth(GroundTruth::Bpr015), &cfg)
        .unwrap()
        .flows;
    Instance { net, dem, flows }
}

/// Five-node ring with chords, two classes, BPR equilibrium; `scale` multiplies demand.
pub fn small_two_class(scale: f64) -> Instance {
    let links = ring_plus(
        5,
        &[
            (0, 2, 3.0, 1.5),
            (2, 4, 4.0, 0.6),
            (1, 3, 2.5, 2.0),
            (4, 1, 3.0, 0.8),
        ],
    );
    let od = [
        (0, 0, 3, 4.0),
        (1, 0, 3, 1.0),
        (0, 1, 4, 3.0),
        (0, 4, 2, 2.0),
        (1, 3, 1, 1.5),
        (0, 0, 2, 2.5),
    ];
    let od: Vec<_> = od
        .iter()
        .map(|&(u, o, d, v)| (u, o, d, scale * v))
        .collect();
    equilibrium(5, &links, ClassConfig::cars_and_trucks(), &od, 300)
}
