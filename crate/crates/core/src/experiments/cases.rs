use std::fmt;
use std::path::Path;

use super::{build_scenario, build_workload, csv_writer, io_err, ExperimentError, ScenarioConfig};
use crate::cluster::ClusterProfile;
use crate::mobility::MobilityKind;
use crate::placement_eval::evaluate;
use crate::solver::{solve_with, SolveResult, SolverKind};

pub const RESULT_HEADER: [&str; 14] = [
    "scenario_id",
    "case",
    "seed",
    "type1_count",
    "cluster_profile",
    "mobility_kind",
    "solver_name",
    "status",
    "node_cost",
    "link_cost",
    "penalty",
    "hop_count",
    "total_cost",
    "elapsed_ms",
];

/// A: poor cluster, low rate. B: rich, low rate. C: rich, high rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Case {
    A,
    B,
    C,
}

impl Case {
    pub const ALL: [Case; 3] = [Case::A, Case::B, Case::C];

    pub fn profile(self) -> ClusterProfile {
        match self {
            Case::A => ClusterProfile::Poor,
            Case::B | Case::C => ClusterProfile::Rich,
        }
    }

    pub fn high_rate(self) -> bool {
        self == Case::C
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub case: Case,
    pub seed: u64,
    pub type1_count: usize,
    pub cluster_profile: ClusterProfile,
    pub mobility_kind: MobilityKind,
    pub solver_name: String,
    pub status: crate::solver::SolveStatus,
    pub node_cost: Option<f64>,
    pub link_cost: Option<f64>,
    pub penalty: Option<f64>,
    pub hop_count: Option<u32>,
    pub total_cost: Option<f64>,
    pub elapsed_ms: f64,
}

/// Re-runs every check on a returned plan before it is reported.
pub(crate) fn recheck(
    r: &SolveResult,
    cluster: &crate::cluster::ClusterGraph,
    mobility: &crate::mobility::ClusterMobility,
    config: &crate::solver::SolverConfig,
    what: &str,
) -> Result<(), ExperimentError> {
    if !r.status.has_plan() {
        return Ok(());
    }
    let (Some(plan), Some(workload)) = (&r.plan, &r.workload) else {
        return Err(ExperimentError::InvalidPlan(format!("{what}: status without plan")));
    };
    let rep = evaluate(plan, cluster, mobility, workload, &config.eval());
    if !rep.violations.is_empty() {
        let list: Vec<String> = rep.violations.iter().map(|v| v.to_string()).collect();
        return Err(ExperimentError::InvalidPlan(format!("{what}: {}", list.join("; "))));
    }
    Ok(())
}

/// The three cases, both mobility kinds, every type-1 count and replication,
/// exact solver and naive baseline. Rows come back sorted by scenario, seed,
/// count and solver.
pub fn run_cases(config: &ScenarioConfig, seed_offset: u64) -> Result<Vec<ResultRow>, ExperimentError> {
    config.validate()?;
    let mut rows = Vec::new();
    for case in Case::ALL {
        let rate = if case.high_rate() {
            config.workload.source_rate_kbps * config.workload.high_rate_multiplier
        } else {
            config.workload.source_rate_kbps
        };
        for kind in [MobilityKind::Stable, MobilityKind::Unstable] {
            let scenario_id = format!("{case}-{}", kind.as_str());
            for r in 0..config.replications {
                let seed = config.cluster.seed + seed_offset + r;
                let mseed = config.mobility.seed + seed_offset + r;
                let (g, m) = build_scenario(&config.cluster, case.profile(), kind, seed, mseed)?;
                for &k in &config.workload.type1_counts {
                    let templates = build_workload(&config.workload.templates, k, rate)?;
                    for solver in [SolverKind::Hierarchical, SolverKind::Naive] {
                        let res = solve_with(solver, &g, &m, &templates, &config.solver)
                            .map_err(|e| ExperimentError::ConfigInvalid(e.to_string()))?;
                        recheck(&res, &g, &m, &config.solver, &format!("{scenario_id} seed {seed} k {k}"))?;
                        let rep = res.report.as_ref();
                        rows.push(ResultRow {
                            scenario_id: scenario_id.clone(),
                            case,
                            seed,
                            type1_count: k,
                            cluster_profile: case.profile(),
                            mobility_kind: kind,
                            solver_name: res.solver.to_string(),
                            status: res.status,
                            node_cost: rep.map(|x| x.node_cost),
                            link_cost: rep.map(|x| x.link_cost),
                            penalty: rep.map(|x| x.penalty),
                            hop_count: rep.map(|x| x.hop_objective),
                            total_cost: rep.map(|x| x.total_cost),
                            elapsed_ms: res.elapsed_ms,
                        });
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.scenario_id, a.seed, a.type1_count, &a.solver_name)
            .cmp(&(&b.scenario_id, b.seed, b.type1_count, &b.solver_name))
    });
    Ok(rows)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_results(rows: &[ResultRow], path: &Path, record_elapsed: bool) -> Result<(), ExperimentError> {
    let mut w = csv_writer(path)?;
    w.write_record(RESULT_HEADER).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.case.to_string(),
            r.seed.to_string(),
            r.type1_count.to_string(),
            r.cluster_profile.as_str().to_string(),
            r.mobility_kind.as_str().to_string(),
            r.solver_name.clone(),
            r.status.to_string(),
            opt(r.node_cost),
            opt(r.link_cost),
            opt(r.penalty),
            opt(r.hop_count),
            opt(r.total_cost),
            if record_elapsed {
                format!("{:.3}", r.elapsed_ms)
            } else {
                String::new()
            },
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
