use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use wardrop_core::{
    assemble_qp, build_multiclass, estimate as run_estimate, feasibility_residual, msa_solve,
    parse_network, parse_trips, read_flows_csv, solve_assembled, split_demand, sup_relative_error,
    write_curve_csv, write_flows_csv, DemandSet, EstimationConfig, EstimationResult, FlowState,
    GroundTruth, LatencyFn, MsaConfig, MulticlassNetwork, Observation,
};

use crate::config::ExperimentConfig;
use crate::CliError;

struct Scenario {
    net: MulticlassNetwork<f64>,
    dem: DemandSet<f64>,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: &Path, r: wardrop_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn load(cfg: &ExperimentConfig) -> Result<Scenario, CliError> {
    let net_path = cfg.network_path()?;
    let trips_path = cfg.trips_path()?;
    let classes = cfg.class_config()?;
    let spec = in_file(net_path, parse_network(open(net_path)?))?;
    let trips = in_file(trips_path, parse_trips(open(trips_path)?))?;
    let net = build_multiclass(spec, classes.clone())?;
    let dem = split_demand(&trips, &classes)?;
    info!(
        "{} nodes, {} links, {} classes, {} OD entries",
        net.node_count(),
        net.link_count(),
        net.class_count(),
        trips.len()
    );
    Ok(Scenario { net, dem })
}

fn output_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn assignment_truth(cfg: &ExperimentConfig) -> Result<GroundTruth, CliError> {
    Ok(match cfg.truth()? {
        Some(t) => t,
        None => {
            info!("no ground truth configured, assigning with bpr015");
            GroundTruth::Bpr015
        }
    })
}

fn equilibrium(
    s: &Scenario,
    cfg: &ExperimentConfig,
) -> Result<wardrop_core::MsaOutput<f64>, CliError> {
    let truth = assignment_truth(cfg)?;
    let msa = MsaConfig {
        epsilon_rg: cfg.msa.epsilon,
        max_iters: cfg.msa.max_iters,
        track_per_origin: true,
    };
    let out = msa_solve(&s.net, &s.dem, &LatencyFn::Truth(truth), &msa)?;
    info!(
        "msa: {} iterations, relative gap {:e}, vi epsilon {:e}",
        out.stats.iterations, out.stats.final_rg, out.stats.vi_epsilon
    );
    Ok(out)
}

pub fn assign(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let s = load(cfg)?;
    let out = equilibrium(&s, cfg)?;
    let dir = output_dir(cfg)?;
    let flows_path = dir.join("flows.csv");
    write_flows_csv(&out.flows, create(&flows_path)?)?;

    let rep = feasibility_residual(
        &s.net,
        out.per_origin.as_deref().unwrap_or(&[]),
        &s.dem,
        Some(&out.flows),
    )?;
    let st = &out.stats;
    let stats_path = dir.join("stats.txt");
    let mut w = create(&stats_path)?;
    let rel = if st.total_cost > 0.0 {
        st.vi_epsilon / st.total_cost
    } else {
        0.0
    };
    let io = |e: std::io::Error| CliError::Data(format!("{}: {e}", stats_path.display()));
    writeln!(w, "iterations = {}", st.iterations).map_err(io)?;
    writeln!(w, "final_rg = {:e}", st.final_rg).map_err(io)?;
    writeln!(w, "vi_epsilon = {}", st.vi_epsilon).map_err(io)?;
    writeln!(w, "total_cost = {}", st.total_cost).map_err(io)?;
    writeln!(w, "vi_epsilon_relative = {rel:e}").map_err(io)?;
    writeln!(w, "conservation_residual = {:e}", rep.conservation).map_err(io)?;
    w.flush().map_err(io)?;
    info!(
        "wrote {} and {}",
        flows_path.display(),
        stats_path.display()
    );
    Ok(())
}

fn observed_flows(
    s: &Scenario,
    cfg: &ExperimentConfig,
    flows: Option<&Path>,
) -> Result<FlowState<f64>, CliError> {
    match flows {
        Some(p) => in_file(
            p,
            read_flows_csv(open(p)?, s.net.link_count(), s.net.class_count()),
        ),
        None => Ok(equilibrium(s, cfg)?.flows),
    }
}

fn estimation_config(
    cfg: &ExperimentConfig,
    degree: usize,
    c: f64,
    gamma: f64,
) -> Result<EstimationConfig<f64>, CliError> {
    let e = EstimationConfig {
        degree,
        kernel_c: c,
        gamma,
        slack_norm: cfg.slack_norm()?,
        grouping: cfg.grouping()?,
        ..EstimationConfig::default()
    };
    e.validate()?;
    Ok(e)
}

fn first<T: Copy>(name: &str, v: &[T]) -> Result<T, CliError> {
    if v.len() > 1 {
        warn!("estimate uses the first of {} values of `{name}`", v.len());
    }
    v.first()
        .copied()
        .ok_or_else(|| CliError::Usage(format!("`{name}` is empty")))
}

fn curve_range(r: &EstimationResult<f64>) -> f64 {
    if r.z_max > 0.0 {
        r.z_max
    } else {
        1.0
    }
}

pub fn estimate(cfg: &ExperimentConfig, flows: Option<&Path>) -> Result<(), CliError> {
    let est = &cfg.estimation;
    let ecfg = estimation_config(
        cfg,
        first("degree", &est.degree)?,
        first("kernel_c", &est.kernel_c)?,
        first("gamma", &est.gamma)?,
    )?;
    let truth = cfg.truth()?;
    let s = load(cfg)?;
    let x = observed_flows(&s, cfg, flows)?;
    let obs = Observation {
        network: &s.net,
        demands: &s.dem,
        flows: &x,
    };
    let r = run_estimate(&[obs], &ecfg)?;

    let dir = output_dir(cfg)?;
    let result_path = dir.join("result.txt");
    let mut w = create(&result_path)?;
    r.write_report(&mut w)?;
    w.flush()
        .map_err(|e| CliError::Data(format!("{}: {e}", result_path.display())))?;
    let curve_path = dir.join("curve.csv");
    write_curve_csv(
        &LatencyFn::Poly(r.poly.clone()),
        truth,
        curve_range(&r),
        est.curve_points,
        create(&curve_path)?,
    )?;
    info!("beta = {:?}, epsilon = {:?}", r.poly.beta(), r.epsilons);
    if let Some(t) = truth {
        let e = sup_relative_error(
            &LatencyFn::Poly(r.poly.clone()),
            &LatencyFn::Truth(t),
            0.9 * curve_range(&r),
            est.curve_points,
        )?;
        info!("sup relative error against {t} on [0, 0.9 z_max]: {e:.4}");
    }
    info!(
        "wrote {} and {}",
        result_path.display(),
        curve_path.display()
    );
    Ok(())
}

struct ManifestRow {
    file: String,
    n: usize,
    c: f64,
    gamma: f64,
    status: String,
    iterations: Option<usize>,
    sup_error: Option<f64>,
    message: String,
}

pub fn sweep(cfg: &ExperimentConfig, flows: Option<&Path>) -> Result<(), CliError> {
    let est = &cfg.estimation;
    for (name, empty) in [
        ("degree", est.degree.is_empty()),
        ("kernel_c", est.kernel_c.is_empty()),
        ("gamma", est.gamma.is_empty()),
    ] {
        if empty {
            return Err(CliError::Usage(format!("sweep grid `{name}` is empty")));
        }
    }
    for &n in &est.degree {
        for &c in &est.kernel_c {
            for &g in &est.gamma {
                estimation_config(cfg, n, c, g)?;
            }
        }
    }
    let truth = cfg.truth()?;
    let s = load(cfg)?;
    let x = observed_flows(&s, cfg, flows)?;
    let obs = [Observation {
        network: &s.net,
        demands: &s.dem,
        flows: &x,
    }];
    let dir = output_dir(cfg)?;

    let mut rows = Vec::new();
    for &n in &est.degree {
        // the constraint matrix depends on n only; (c, gamma) enter through the objective
        let base = estimation_config(cfg, n, est.kernel_c[0], est.gamma[0])?;
        let mut asm = match assemble_qp(&obs, &base) {
            Ok(a) => Some(a),
            Err(e) => {
                warn!("n = {n}: assembly failed: {e}");
                for &c in &est.kernel_c {
                    for &g in &est.gamma {
                        rows.push(ManifestRow {
                            file: String::new(),
                            n,
                            c,
                            gamma: g,
                            status: "failed".into(),
                            iterations: None,
                            sup_error: None,
                            message: e.to_string(),
                        });
                    }
                }
                None
            }
        };
        let Some(asm) = asm.as_mut() else { continue };
        for &c in &est.kernel_c {
            for &g in &est.gamma {
                let file = format!("curve_n{n}_c{c}_g{g}.csv");
                let outcome = asm
                    .set_objective(c, g, base.slack_norm)
                    .and_then(|_| solve_assembled(asm, &base.solver))
                    .and_then(|r| {
                        let f = LatencyFn::Poly(r.poly.clone());
                        write_curve_csv(
                            &f,
                            truth,
                            curve_range(&r),
                            est.curve_points,
                            create_core(&dir.join(&file))?,
                        )?;
                        let err = truth
                            .map(|t| {
                                sup_relative_error(
                                    &f,
                                    &LatencyFn::Truth(t),
                                    0.9 * curve_range(&r),
                                    est.curve_points,
                                )
                            })
                            .transpose()?;
                        Ok((r.qp.iterations, err))
                    });
                let row = match outcome {
                    Ok((it, err)) => {
                        info!("n = {n}, c = {c}, gamma = {g}: {it} iterations");
                        ManifestRow {
                            file,
                            n,
                            c,
                            gamma: g,
                            status: "ok".into(),
                            iterations: Some(it),
                            sup_error: err,
                            message: String::new(),
                        }
                    }
                    Err(e) => {
                        warn!("n = {n}, c = {c}, gamma = {g}: {e}");
                        ManifestRow {
                            file: String::new(),
                            n,
                            c,
                            gamma: g,
                            status: "failed".into(),
                            iterations: None,
                            sup_error: None,
                            message: e.to_string(),
                        }
                    }
                };
                rows.push(row);
            }
        }
    }

    let manifest = dir.join("manifest.csv");
    write_manifest(&manifest, &rows)
        .map_err(|e| CliError::Data(format!("{}: {e}", manifest.display())))?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        warn!(
            "{failed} of {} grid points failed; see {}",
            rows.len(),
            manifest.display()
        );
    }
    info!(
        "wrote {} curves and {}",
        rows.len() - failed,
        manifest.display()
    );
    Ok(())
}

fn create_core(path: &Path) -> wardrop_core::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_manifest(path: &Path, rows: &[ManifestRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "file",
        "n",
        "c",
        "gamma",
        "status",
        "iterations",
        "sup_error",
        "message",
    ])?;
    for r in rows {
        w.write_record([
            r.file.clone(),
            r.n.to_string(),
            r.c.to_string(),
            r.gamma.to_string(),
            r.status.clone(),
            r.iterations.map(|v| v.to_string()).unwrap_or_default(),
            r.sup_error.map(|v| v.to_string()).unwrap_or_default(),
            r.message.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
