//! Multi-class traffic equilibrium and inverse estimation of a shared
//! BPR-type latency function.
//!
//! * [`tntp_io`]: TNTP networks and trip tables, flow CSV files
//! * [`netmodel`]: class copies of the network, demands, shortest paths, conservation checks
//! * [`cost_bpr`]: latency `t0_iu f(theta' x_i / m_i)` and the polynomial estimator family
//! * [`msa`]: equilibrium by successive averages
//! * [`invvi`]: QP assembly and estimation from observed equilibria
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*F64` aliases
//! below fix the common case.

pub mod cost_bpr;
pub mod error;
pub mod invvi;
pub mod msa;
pub mod netmodel;
pub mod tntp_io;

pub use wardrop_qp as qp;
pub use wardrop_qp::Scalar;

pub use cost_bpr::{
    congestion_ratio, congestion_ratios, eval_latency, eval_poly, sample_curve, sup_relative_error,
    write_curve_csv, CostModel, Curve, GroundTruth, LatencyFn, LinkCosts, PolynomialCost,
};
pub use error::{Error, Result};
pub use invvi::{
    assemble_qp, estimate, monotonicity_all_pairs, monotonicity_chain, regularizer_weights,
    solve_assembled, AssembledQp, DualGrouping, DualRestriction, EstimationConfig,
    EstimationResult, MonotonicityForm, Observation, SlackNorm, VariableMap,
};
pub use msa::{
    all_or_nothing, all_or_nothing_by_origin, msa_run, msa_solve, vi_epsilon, MsaConfig, MsaOutput,
    MsaStats,
};
pub use netmodel::{
    aggregate_balance_residual, build_multiclass, feasibility_residual, node_balance_residual,
    shortest_path_tree, split_demand, ClassConfig, DemandSet, FeasibilityReport, FlowState,
    MulticlassNetwork, OriginFlows, ShortestPathTree,
};
pub use tntp_io::{
    parse_network, parse_network_str, parse_trips, parse_trips_str, read_flows_csv,
    write_flows_csv, write_network, DemandTable, LinkSpec, NetworkSpec,
};

pub type NetworkSpecF64 = NetworkSpec<f64>;
pub type DemandTableF64 = DemandTable<f64>;
pub type ClassConfigF64 = ClassConfig<f64>;
pub type MulticlassNetworkF64 = MulticlassNetwork<f64>;
pub type DemandSetF64 = DemandSet<f64>;
pub type FlowStateF64 = FlowState<f64>;
pub type PolynomialCostF64 = PolynomialCost<f64>;
pub type LatencyFnF64 = LatencyFn<f64>;
pub type MsaConfigF64 = MsaConfig<f64>;
pub type EstimationConfigF64 = EstimationConfig<f64>;
pub type EstimationResultF64 = EstimationResult<f64>;
