//! Placement solvers: the exact hops-then-cost branch and bound, an
//! exhaustive oracle and the capacity-greedy baseline.

mod bruteforce;
mod naive;
mod search;

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{validate, ClusterGraph};
use crate::mobility::ClusterMobility;
use crate::placement_eval::{evaluate, CostReport, EvalConfig, PlacementPlan};
use crate::service_model::{scale_instances, TypeGraph, Workload};

pub use bruteforce::{bruteforce_space, solve_bruteforce};
pub use naive::solve_naive;

use search::{search, Goal, LevelState, Limits, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Hierarchical,
    WeightedSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub penalty_lambda: f64,
    pub p_threshold: f64,
    /// seconds
    pub time_limit: Option<f64>,
    /// cap on replicas of each processing type
    pub max_instances: Option<usize>,
    pub mode: SolveMode,
    /// weight on hops in `weighted_sum` mode
    pub hop_weight: f64,
    /// search-node budget, handled like the time limit
    pub node_limit: Option<u64>,
    /// largest candidate count the exhaustive solver accepts
    pub bruteforce_cap: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
            penalty_lambda: 0.0,
            p_threshold: 0.6,
            time_limit: None,
            max_instances: None,
            mode: SolveMode::Hierarchical,
            hop_weight: 1.0,
            node_limit: None,
            bruteforce_cap: 10_000_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::InvalidConfig(m.into()));
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return bad("lambda1 and lambda2 must be non-negative");
        }
        if (self.lambda1 + self.lambda2 - 1.0).abs() > 1e-12 {
            return bad("lambda1 + lambda2 must equal 1");
        }
        if !(self.penalty_lambda >= 0.0) {
            return bad("penalty_lambda must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.p_threshold) {
            return bad("p_threshold outside [0,1]");
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0) {
                return bad("time_limit must be positive");
            }
        }
        if self.max_instances == Some(0) {
            return bad("max_instances must be at least 1");
        }
        if !(self.hop_weight >= 0.0) {
            return bad("hop_weight must be non-negative");
        }
        Ok(())
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            penalty_lambda: self.penalty_lambda,
            p_threshold: self.p_threshold,
        }
    }

    fn limits(&self) -> Limits {
        Limits {
            time: self.time_limit.map(Duration::from_secs_f64),
            nodes: self.node_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    /// a limit stopped the search after an incumbent was found
    Feasible,
    Infeasible,
    /// a limit stopped the search before any plan was found
    TimedOut,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Feasible => "Feasible",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::TimedOut => "TimedOut",
        }
    }

    pub fn has_plan(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Feasible)
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("search space of {estimate:.3e} candidates exceeds cap {cap}")]
    SpaceTooLarge { estimate: f64, cap: u64 },
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solver: &'static str,
    pub status: SolveStatus,
    pub plan: Option<PlacementPlan>,
    pub report: Option<CostReport>,
    /// the scaled workload the plan refers to
    pub workload: Option<Workload>,
    /// per app, per type
    pub instance_counts: Vec<Vec<usize>>,
    pub elapsed_ms: f64,
    pub nodes_explored: u64,
}

impl SolveResult {
    fn empty(solver: &'static str, status: SolveStatus, start: Instant, nodes: u64) -> Self {
        Self {
            solver,
            status,
            plan: None,
            report: None,
            workload: None,
            instance_counts: Vec::new(),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            nodes_explored: nodes,
        }
    }

    pub fn hop_objective(&self) -> Option<u32> {
        self.report.as_ref().map(|r| r.hop_objective)
    }

    pub fn total_cost(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.total_cost)
    }
}

fn prepare(
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    templates: &[TypeGraph],
    config: &SolverConfig,
) -> Result<Vec<TypeGraph>, SolveError> {
    config.validate()?;
    if templates.is_empty() {
        return Err(SolveError::InvalidInput("no templates".into()));
    }
    let problems = validate(cluster);
    if !problems.is_empty() {
        return Err(SolveError::InvalidInput(format!("cluster: {problems:?}")));
    }
    if mobility.len() != cluster.len() {
        return Err(SolveError::InvalidInput(format!(
            "{} CCP values for {} nodes",
            mobility.len(),
            cluster.len()
        )));
    }
    templates
        .iter()
        .map(|t| {
            t.validate()
                .map_err(|e| SolveError::InvalidInput(e.to_string()))?;
            Ok(match config.max_instances {
                Some(m) => t.clone().with_max_instances(m),
                None => t.clone(),
            })
        })
        .collect()
}

/// Turns the engine's per-level host lists back into instance graphs and a
/// routed plan.
fn assemble(
    levels: &[Vec<LevelState>],
    templates: &[TypeGraph],
    cluster: &ClusterGraph,
    problem: &Problem<'_>,
) -> (Workload, PlacementPlan, Vec<Vec<usize>>) {
    let mut apps = Vec::new();
    let mut assignment = Vec::new();
    let mut counts = Vec::new();
    for (tg, lv) in templates.iter().zip(levels) {
        let c: Vec<usize> = lv.iter().map(|l| l.hosts.len()).collect();
        let wiring: Vec<Vec<usize>> = lv[1..].iter().map(|l| l.wiring.clone()).collect();
        apps.push(scale_instances(tg, &c, &wiring).expect("search builds valid trees"));
        for l in lv {
            assignment.extend_from_slice(&l.hosts);
        }
        counts.push(c);
    }
    let workload = Workload::new(apps);
    let plan = PlacementPlan::routed(assignment, &workload, cluster, problem.route_table())
        .expect("search only uses reachable pairs");
    (workload, plan, counts)
}

fn run_engine(
    name: &'static str,
    goal_of: impl Fn(&SolverConfig) -> Goal,
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    templates: &[TypeGraph],
    config: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let templates = prepare(cluster, mobility, templates, config)?;
    let eval = config.eval();
    let problem = Problem::new(cluster, mobility, &templates, &eval);
    let out = search(&problem, goal_of(config), config.limits());
    let Some(levels) = out.best else {
        let status = if out.aborted {
            SolveStatus::TimedOut
        } else {
            SolveStatus::Infeasible
        };
        return Ok(SolveResult::empty(name, status, start, out.nodes));
    };
    let (workload, plan, counts) = assemble(&levels, &templates, cluster, &problem);
    let report = evaluate(&plan, cluster, mobility, &workload, &eval);
    let status = if out.aborted {
        SolveStatus::Feasible
    } else {
        SolveStatus::Optimal
    };
    Ok(SolveResult {
        solver: name,
        status,
        plan: Some(plan),
        report: Some(report),
        workload: Some(workload),
        instance_counts: counts,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        nodes_explored: out.nodes,
    })
}

fn goal(config: &SolverConfig) -> Goal {
    match config.mode {
        SolveMode::Hierarchical => Goal::Lexicographic,
        SolveMode::WeightedSum => Goal::Weighted(config.hop_weight),
    }
}

/// Exact optimum: fewest total hops, then least total cost among those
/// (or the weighted single objective in `weighted_sum` mode).
pub fn solve_hierarchical(
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    templates: &[TypeGraph],
    config: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    run_engine("optimal", goal, cluster, mobility, templates, config)
}

/// Feasible plan with the largest total hop count; respects the same limits.
pub fn worst_case_hops(
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    templates: &[TypeGraph],
    config: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    run_engine("worst_hops", |_| Goal::MaxHops, cluster, mobility, templates, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Hierarchical,
    BruteForce,
    Naive,
}

pub fn solve_with(
    kind: SolverKind,
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    templates: &[TypeGraph],
    config: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    match kind {
        SolverKind::Hierarchical => solve_hierarchical(cluster, mobility, templates, config),
        SolverKind::BruteForce => solve_bruteforce(cluster, mobility, templates, config),
        SolverKind::Naive => solve_naive(cluster, mobility, templates, config),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub solver: &'static str,
    pub status: SolveStatus,
    pub node_cost: f64,
    pub link_cost: f64,
    pub penalty: f64,
    pub hops: u32,
    pub total: f64,
    pub elapsed_ms: f64,
}

/// Runs each solver on the same inputs. Costs are NaN when no plan exists.
pub fn compare(
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    templates: &[TypeGraph],
    config: &SolverConfig,
    solvers: &[SolverKind],
) -> Result<Vec<ComparisonRow>, SolveError> {
    solvers
        .iter()
        .map(|&k| {
            let r = solve_with(k, cluster, mobility, templates, config)?;
            let rep = r.report.as_ref();
            Ok(ComparisonRow {
                solver: r.solver,
                status: r.status,
                node_cost: rep.map_or(f64::NAN, |x| x.node_cost),
                link_cost: rep.map_or(f64::NAN, |x| x.link_cost),
                penalty: rep.map_or(f64::NAN, |x| x.penalty),
                hops: rep.map_or(0, |x| x.hop_objective),
                total: rep.map_or(f64::NAN, |x| x.total_cost),
                elapsed_ms: r.elapsed_ms,
            })
        })
        .collect()
}
