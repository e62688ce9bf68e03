//! Experiment configuration: a TOML file, overridden by command-line flags.
//!
//! ```toml
//! network = "SiouxFalls_net.tntp"
//! trips = "SiouxFalls_trips.tntp"
//! output = "out"
//! truth = "bpr015"            # or "quartic1"; omit when unknown
//!
//! [classes]
//! theta = [1.0, 2.0]
//! t0_multiplier = [1.0, 1.1]
//! demand_share = [0.8, 0.2]
//!
//! [msa]
//! epsilon = 1e-6
//! max_iters = 1000
//!
//! [estimation]
//! degree = [3, 4, 5, 6]
//! kernel_c = [1.5]
//! gamma = [0.01]
//! slack_norm = "l1"           # or "squared-l2"
//! grouping = "origin"         # or "od-pair"
//! curve_points = 101
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use wardrop_core::{ClassConfig, DualGrouping, GroundTruth, SlackNorm};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub truth: Option<String>,
    #[serde(default)]
    pub classes: ClassSection,
    #[serde(default)]
    pub msa: MsaSection,
    #[serde(default)]
    pub estimation: EstimationSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSection {
    pub theta: Vec<f64>,
    pub t0_multiplier: Vec<f64>,
    pub demand_share: Vec<f64>,
}

impl Default for ClassSection {
    fn default() -> Self {
        Self {
            theta: vec![1.0, 2.0],
            t0_multiplier: vec![1.0, 1.1],
            demand_share: vec![0.8, 0.2],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsaSection {
    pub epsilon: f64,
    pub max_iters: usize,
}

impl Default for MsaSection {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    pub degree: Vec<usize>,
    pub kernel_c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub slack_norm: String,
    pub grouping: String,
    pub curve_points: usize,
}

impl Default for EstimationSection {
    fn default() -> Self {
        Self {
            degree: vec![5],
            kernel_c: vec![1.5],
            gamma: vec![0.01],
            slack_norm: "l1".into(),
            grouping: "origin".into(),
            curve_points: 101,
        }
    }
}

/// Values given on the command line; each replaces the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub network: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub degree: Option<usize>,
    pub kernel_c: Option<f64>,
    pub gamma: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.network, &mut cfg.trips, &mut cfg.output]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.network {
            self.network = Some(p.clone());
        }
        if let Some(p) = &o.trips {
            self.trips = Some(p.clone());
        }
        if let Some(p) = &o.output {
            self.output = Some(p.clone());
        }
        if let Some(n) = o.degree {
            self.estimation.degree = vec![n];
        }
        if let Some(c) = o.kernel_c {
            self.estimation.kernel_c = vec![c];
        }
        if let Some(g) = o.gamma {
            self.estimation.gamma = vec![g];
        }
    }

    pub fn network_path(&self) -> Result<&Path, CliError> {
        self.network
            .as_deref()
            .ok_or_else(|| CliError::Usage("no network file (use --net or `network`)".into()))
    }

    pub fn trips_path(&self) -> Result<&Path, CliError> {
        self.trips
            .as_deref()
            .ok_or_else(|| CliError::Usage("no trips file (use --trips or `trips`)".into()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn class_config(&self) -> Result<ClassConfig<f64>, CliError> {
        let c = &self.classes;
        Ok(ClassConfig::new(
            c.theta.clone(),
            c.t0_multiplier.clone(),
            c.demand_share.clone(),
        )?)
    }

    pub fn truth(&self) -> Result<Option<GroundTruth>, CliError> {
        self.truth
            .as_deref()
            .map(str::parse)
            .transpose()
            .map_err(CliError::from)
    }

    pub fn slack_norm(&self) -> Result<SlackNorm, CliError> {
        Ok(self.estimation.slack_norm.parse()?)
    }

    pub fn grouping(&self) -> Result<DualGrouping, CliError> {
        match self
            .estimation
            .grouping
            .trim()
            .to_ascii_lowercase()
            .as_str()
        {
            "origin" => Ok(DualGrouping::Origin),
            "od-pair" | "od_pair" | "od" => Ok(DualGrouping::OdPair),
            other => Err(CliError::Usage(format!(
                "unknown grouping `{other}` (origin, od-pair)"
            ))),
        }
    }
}
