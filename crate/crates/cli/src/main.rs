//! `wardrop assign | estimate | sweep`
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use config::{ExperimentConfig, Overrides};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

impl From<wardrop_core::Error> for CliError {
    fn from(e: wardrop_core::Error) -> Self {
        use wardrop_core::Error as E;
        match e {
            E::Config(_) => CliError::Usage(e.to_string()),
            E::Solver { .. } | E::Qp(_) => CliError::Solver(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "wardrop",
    version,
    about = "Multi-class traffic equilibria and latency estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium flows by successive averages under the configured ground truth.
    Assign(Common),
    /// Estimate the latency function from one observed equilibrium.
    Estimate(Common),
    /// Estimate over the cartesian product of the (n, c, gamma) grids.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    net: Option<PathBuf>,
    #[arg(long)]
    trips: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Observed flows (`link_index,class_index,flow`); generated by assignment when omitted.
    #[arg(long)]
    flows: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(&Overrides {
            network: self.net.clone(),
            trips: self.trips.clone(),
            output: self.out.clone(),
            degree: self.n,
            kernel_c: self.c,
            gamma: self.gamma,
        });
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Assign(a) => a.resolve().and_then(|cfg| commands::assign(&cfg)),
        Command::Estimate(a) => a
            .resolve()
            .and_then(|cfg| commands::estimate(&cfg, a.flows.as_deref())),
        Command::Sweep(a) => a
            .resolve()
            .and_then(|cfg| commands::sweep(&cfg, a.flows.as_deref())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wardrop: {e}");
            ExitCode::from(e.code())
        }
    }
}
