//! Seeded experiment sweeps over clusters, mobility and workloads, written
//! out as plot-ready CSV.

mod cases;
mod sweeps;
mod traffic;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{generate_cluster_with, ClusterGraph, ClusterOptions, ClusterProfile};
use crate::mobility::{sample_profile, ClusterMobility, MobilityKind};
use crate::service_model::{build_template, AppName, TypeGraph, MAX_TYPE1_COUNT};
use crate::solver::SolverConfig;

pub use cases::{run_cases, write_results, Case, ResultRow, RESULT_HEADER};
pub use sweeps::{
    hop_experiment, penalty_experiment, sensitivity_lambda, write_hops, write_penalty,
    write_sensitivity, HopRow, PenaltyRow, SensitivityRow,
};
pub use traffic::{traffic_report, TrafficReport};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("cannot write output: {0}")]
    OutputUnwritable(String),
    #[error("input: {0}")]
    Input(String),
    #[error("solver returned a plan that fails validation: {0}")]
    InvalidPlan(String),
}

impl ExperimentError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::ConfigInvalid(_) => 2,
            ExperimentError::OutputUnwritable(_) | ExperimentError::Input(_) => 4,
            ExperimentError::InvalidPlan(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilitySection {
    pub kind: MobilityKind,
    pub seed: u64,
}

impl Default for MobilitySection {
    fn default() -> Self {
        Self {
            kind: MobilityKind::Stable,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadSection {
    pub templates: Vec<String>,
    /// total camera streams, split over the templates
    pub type1_counts: Vec<usize>,
    pub source_rate_kbps: f64,
    pub high_rate_multiplier: f64,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            templates: vec!["AppI".into(), "AppII".into()],
            type1_counts: vec![2, 3, 4, 5, 6],
            source_rate_kbps: 100.0,
            high_rate_multiplier: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivitySection {
    /// explicit lambda1 values; empty means `random_count` seeded draws
    pub weights: Vec<f64>,
    pub random_count: usize,
    pub seed: u64,
    pub type1_count: usize,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self {
            weights: (0..=10).map(|i| i as f64 / 10.0).collect(),
            random_count: 20,
            seed: 7,
            type1_count: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltySection {
    pub lambda: f64,
    pub threshold: f64,
}

impl Default for PenaltySection {
    fn default() -> Self {
        Self {
            lambda: 10.0,
            threshold: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HopsSection {
    pub type1_counts: Vec<usize>,
    pub profile: ClusterProfile,
    /// search-node budget for the worst-case search
    pub worst_node_limit: u64,
}

impl Default for HopsSection {
    fn default() -> Self {
        Self {
            type1_counts: vec![1, 2, 3, 4, 5, 6],
            profile: ClusterProfile::Poor,
            worst_node_limit: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficSection {
    /// interval count CSV for the `traffic` verb
    pub counts_csv: Option<PathBuf>,
    pub lanes: f64,
    /// mph, used to turn hourly flow into density
    pub mean_speed: f64,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            counts_csv: None,
            lanes: 2.0,
            mean_speed: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub cluster: ClusterOptions,
    pub mobility: MobilitySection,
    pub workload: WorkloadSection,
    pub solver: SolverConfig,
    pub replications: u64,
    pub output: PathBuf,
    /// fill `elapsed_ms`; off by default so repeated runs are byte-identical
    pub record_elapsed: bool,
    pub sensitivity: SensitivitySection,
    pub penalty: PenaltySection,
    pub hops: HopsSection,
    pub traffic: TrafficSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cluster: ClusterOptions::default(),
            mobility: MobilitySection::default(),
            workload: WorkloadSection::default(),
            solver: SolverConfig::default(),
            replications: 20,
            output: PathBuf::from("out"),
            record_elapsed: false,
            sensitivity: SensitivitySection::default(),
            penalty: PenaltySection::default(),
            hops: HopsSection::default(),
            traffic: TrafficSection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::ConfigInvalid(m));
        if self.cluster.n < 3 {
            return bad(format!("cluster.n = {} (needs >= 3)", self.cluster.n));
        }
        if self.cluster.n > 64 {
            return bad("cluster.n above 64 is not supported".into());
        }
        if !(self.cluster.link_density > 0.0 && self.cluster.link_density <= 1.0) {
            return bad("cluster.link_density outside (0,1]".into());
        }
        if !(0.0..=1.0).contains(&self.cluster.camera_fraction) {
            return bad("cluster.camera_fraction outside [0,1]".into());
        }
        if self.replications < 1 {
            return bad("replications must be >= 1".into());
        }
        if self.workload.templates.is_empty() {
            return bad("workload.templates is empty".into());
        }
        for t in &self.workload.templates {
            t.parse::<AppName>()
                .map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
        }
        let max_total = MAX_TYPE1_COUNT;
        for &k in self.workload.type1_counts.iter().chain(&self.hops.type1_counts) {
            if !(1..=max_total).contains(&k) {
                return bad(format!("type1 count {k} outside 1..={max_total}"));
            }
        }
        if !(1..=max_total).contains(&self.sensitivity.type1_count) {
            return bad("sensitivity.type1_count outside 1..=6".into());
        }
        if self.sensitivity.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return bad("sensitivity weights outside [0,1]".into());
        }
        if !(self.workload.source_rate_kbps > 0.0 && self.workload.high_rate_multiplier > 0.0) {
            return bad("source rate and multiplier must be positive".into());
        }
        if !(self.penalty.lambda >= 0.0 && (0.0..=1.0).contains(&self.penalty.threshold)) {
            return bad("penalty section out of range".into());
        }
        self.solver
            .validate()
            .map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))
    }
}

/// Splits `total` camera streams over the apps, earlier apps first; apps
/// left with zero streams are dropped.
pub fn build_workload(
    templates: &[String],
    total: usize,
    source_rate: f64,
) -> Result<Vec<TypeGraph>, ExperimentError> {
    let n = templates.len();
    let mut out = Vec::new();
    for (i, name) in templates.iter().enumerate() {
        let share = total / n + usize::from(i < total % n);
        if share == 0 {
            continue;
        }
        let app: AppName = name
            .parse()
            .map_err(|e: crate::service_model::ServiceError| ExperimentError::ConfigInvalid(e.to_string()))?;
        out.push(
            build_template(app, share, source_rate)
                .map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?,
        );
    }
    Ok(out)
}

/// One seeded cluster with its CN-anchored CCPs.
pub fn build_scenario(
    base: &ClusterOptions,
    profile: ClusterProfile,
    kind: MobilityKind,
    seed: u64,
    mobility_seed: u64,
) -> Result<(ClusterGraph, ClusterMobility), ExperimentError> {
    let opts = ClusterOptions {
        profile,
        seed,
        ..base.clone()
    };
    let g = generate_cluster_with(&opts).map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
    let p = sample_profile(kind, g.len(), mobility_seed)
        .map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
    let m = ClusterMobility::anchored(&p, g.cn());
    Ok((g, m))
}

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::OutputUnwritable(format!("{}: {e}", path.display()))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, ExperimentError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}
