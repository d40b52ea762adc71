use std::path::Path;

use super::cases::recheck;
use super::{build_scenario, build_workload, csv_writer, io_err, ExperimentError, ScenarioConfig};
use crate::cluster::ClusterProfile;
use crate::mobility::MobilityKind;
use crate::rng::SeededRng;
use crate::solver::{solve_hierarchical, worst_case_hops, SolveStatus, SolverConfig};

fn solver_err(e: crate::solver::SolveError) -> ExperimentError {
    ExperimentError::ConfigInvalid(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub lambda1: f64,
    pub profile: ClusterProfile,
    pub status: SolveStatus,
    pub total_cost: Option<f64>,
    pub node_cost: Option<f64>,
    pub link_cost: Option<f64>,
}

/// Re-solves one rich and one poor scenario for each link-cost weight
/// `lambda1`, with `lambda2 = 1 - lambda1`.
pub fn sensitivity_lambda(
    config: &ScenarioConfig,
    seed_offset: u64,
) -> Result<Vec<SensitivityRow>, ExperimentError> {
    config.validate()?;
    let s = &config.sensitivity;
    let weights: Vec<f64> = if s.weights.is_empty() {
        let mut rng = SeededRng::new(s.seed + seed_offset);
        (0..s.random_count).map(|_| rng.next_f64()).collect()
    } else {
        s.weights.clone()
    };
    let templates = build_workload(
        &config.workload.templates,
        s.type1_count,
        config.workload.source_rate_kbps,
    )?;
    let mut rows = Vec::new();
    for profile in [ClusterProfile::Rich, ClusterProfile::Poor] {
        let (g, m) = build_scenario(
            &config.cluster,
            profile,
            config.mobility.kind,
            config.cluster.seed + seed_offset,
            config.mobility.seed + seed_offset,
        )?;
        for &w in &weights {
            let cfg = SolverConfig {
                lambda1: w,
                lambda2: 1.0 - w,
                ..config.solver.clone()
            };
            let r = solve_hierarchical(&g, &m, &templates, &cfg).map_err(solver_err)?;
            recheck(&r, &g, &m, &cfg, "sensitivity")?;
            let rep = r.report.as_ref();
            rows.push(SensitivityRow {
                lambda1: w,
                profile,
                status: r.status,
                total_cost: rep.map(|x| x.total_cost),
                node_cost: rep.map(|x| x.node_cost),
                link_cost: rep.map(|x| x.link_cost),
            });
        }
    }
    Ok(rows)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sensitivity(rows: &[SensitivityRow], path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv_writer(path)?;
    w.write_record(["lambda1", "profile", "total_cost"]).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([r.lambda1.to_string(), r.profile.as_str().into(), opt(r.total_cost)])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyRow {
    pub mobility_kind: MobilityKind,
    pub profile: ClusterProfile,
    pub type1_count: usize,
    pub seed: u64,
    pub status: SolveStatus,
    pub penalty: Option<f64>,
}

/// Solves with the low-cohesion penalty switched on and records the penalty
/// part of each optimum.
pub fn penalty_experiment(
    config: &ScenarioConfig,
    seed_offset: u64,
) -> Result<Vec<PenaltyRow>, ExperimentError> {
    config.validate()?;
    let cfg = SolverConfig {
        penalty_lambda: config.penalty.lambda,
        p_threshold: config.penalty.threshold,
        ..config.solver.clone()
    };
    let mut rows = Vec::new();
    for profile in [ClusterProfile::Rich, ClusterProfile::Poor] {
        for kind in [MobilityKind::Stable, MobilityKind::Unstable] {
            for r in 0..config.replications {
                let seed = config.cluster.seed + seed_offset + r;
                let (g, m) =
                    build_scenario(&config.cluster, profile, kind, seed, config.mobility.seed + seed_offset + r)?;
                for &k in &config.workload.type1_counts {
                    let templates =
                        build_workload(&config.workload.templates, k, config.workload.source_rate_kbps)?;
                    let res = solve_hierarchical(&g, &m, &templates, &cfg).map_err(solver_err)?;
                    recheck(&res, &g, &m, &cfg, "penalty")?;
                    rows.push(PenaltyRow {
                        mobility_kind: kind,
                        profile,
                        type1_count: k,
                        seed,
                        status: res.status,
                        penalty: res.report.as_ref().map(|x| x.penalty),
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_penalty(rows: &[PenaltyRow], path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv_writer(path)?;
    w.write_record(["mobility_kind", "profile", "type1_count", "seed", "penalty"])
        .map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([
            r.mobility_kind.as_str().to_string(),
            r.profile.as_str().to_string(),
            r.type1_count.to_string(),
            r.seed.to_string(),
            opt(r.penalty),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopRow {
    pub type1_count: usize,
    pub best_hops: Option<u32>,
    pub worst_hops: Option<u32>,
    /// false when the worst-case search hit its node budget
    pub worst_exhaustive: bool,
}

/// Best (hop-optimal) and worst feasible hop totals on one fixed cluster.
pub fn hop_experiment(config: &ScenarioConfig, seed_offset: u64) -> Result<Vec<HopRow>, ExperimentError> {
    config.validate()?;
    let (g, m) = build_scenario(
        &config.cluster,
        config.hops.profile,
        config.mobility.kind,
        config.cluster.seed + seed_offset,
        config.mobility.seed + seed_offset,
    )?;
    let worst_cfg = SolverConfig {
        node_limit: Some(config.hops.worst_node_limit),
        ..config.solver.clone()
    };
    let mut rows = Vec::new();
    for &k in &config.hops.type1_counts {
        let templates = build_workload(&config.workload.templates, k, config.workload.source_rate_kbps)?;
        let best = solve_hierarchical(&g, &m, &templates, &config.solver).map_err(solver_err)?;
        recheck(&best, &g, &m, &config.solver, "hops best")?;
        let worst = worst_case_hops(&g, &m, &templates, &worst_cfg).map_err(solver_err)?;
        recheck(&worst, &g, &m, &worst_cfg, "hops worst")?;
        rows.push(HopRow {
            type1_count: k,
            best_hops: best.hop_objective(),
            worst_hops: worst.hop_objective(),
            worst_exhaustive: worst.status == SolveStatus::Optimal,
        });
    }
    Ok(rows)
}

pub fn write_hops(rows: &[HopRow], path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv_writer(path)?;
    w.write_record(["type1_count", "best_hops", "worst_hops", "worst_exhaustive"])
        .map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record([
            r.type1_count.to_string(),
            opt(r.best_hops),
            opt(r.worst_hops),
            r.worst_exhaustive.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}
