//! Exhaustive oracle: every instance count, every onto wiring and every host
//! vector, each scored by the plain evaluator.

use std::time::Instant;

use super::{prepare, SolveError, SolveMode, SolveResult, SolveStatus, SolverConfig};
use crate::cluster::ClusterGraph;
use crate::mobility::ClusterMobility;
use crate::placement_eval::{evaluate, PlacementPlan};
use crate::routing::RouteTable;
use crate::service_model::{scale_instances, InstanceGraph, TypeGraph, Workload};

/// All maps `0..from -> 0..to` that hit every target.
fn onto_maps(from: usize, to: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if to == 0 || to > from {
        return out;
    }
    let mut cur = vec![0; from];
    loop {
        let mut hit = vec![false; to];
        cur.iter().for_each(|&t| hit[t] = true);
        if hit.iter().all(|h| *h) {
            out.push(cur.clone());
        }
        let mut i = 0;
        loop {
            if i == from {
                return out;
            }
            cur[i] += 1;
            if cur[i] < to {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
}

fn app_graphs(tg: &TypeGraph) -> Vec<InstanceGraph> {
    let mut out = Vec::new();
    let mut counts = vec![tg.type1_count()];
    fn rec(tg: &TypeGraph, counts: &mut Vec<usize>, out: &mut Vec<InstanceGraph>) {
        if counts.len() == tg.chain.len() {
            let mut wirings: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
            for w in counts.windows(2) {
                let maps = onto_maps(w[0], w[1]);
                wirings = wirings
                    .iter()
                    .flat_map(|pre| {
                        maps.iter().map(move |m| {
                            let mut x = pre.clone();
                            x.push(m.clone());
                            x
                        })
                    })
                    .collect();
            }
            for w in wirings {
                if let Ok(ig) = scale_instances(tg, counts, &w) {
                    out.push(ig);
                }
            }
            return;
        }
        let (lo, hi) = tg.chain[counts.len()].instance_bounds;
        for c in lo..=hi {
            counts.push(c);
            rec(tg, counts, out);
            counts.pop();
        }
    }
    rec(tg, &mut counts, &mut out);
    out
}

/// Number of (instance graph, host vector) candidates the oracle would score.
pub fn bruteforce_space(
    cluster: &ClusterGraph,
    templates: &[TypeGraph],
    config: &SolverConfig,
) -> f64 {
    let n = cluster.len() as f64;
    templates
        .iter()
        .map(|t| {
            let t = match config.max_instances {
                Some(m) => t.clone().with_max_instances(m),
                None => t.clone(),
            };
            app_graphs(&t).iter().map(|g| n.powi(g.tis.len() as i32)).sum::<f64>()
        })
        .product()
}

pub fn solve_bruteforce(
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    templates: &[TypeGraph],
    config: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let templates = prepare(cluster, mobility, templates, config)?;
    let estimate = bruteforce_space(cluster, &templates, config);
    if estimate > config.bruteforce_cap as f64 {
        return Err(SolveError::SpaceTooLarge {
            estimate,
            cap: config.bruteforce_cap,
        });
    }
    let eval = config.eval();
    let table = RouteTable::new(cluster, mobility);
    let per_app: Vec<Vec<InstanceGraph>> = templates.iter().map(app_graphs).collect();
    let n = cluster.len();

    let mut best: Option<((f64, f64), SolveResult)> = None;
    let mut scored = 0u64;
    let mut pick = vec![0usize; per_app.len()];
    if per_app.iter().any(|v| v.is_empty()) {
        return Ok(SolveResult::empty("bruteforce", SolveStatus::Infeasible, start, 0));
    }
    'combos: loop {
        let apps: Vec<InstanceGraph> = pick
            .iter()
            .zip(&per_app)
            .map(|(&i, v)| v[i].clone())
            .collect();
        let workload = Workload::new(apps);
        let t = workload.len();
        let mut hosts = vec![0usize; t];
        'hosts: loop {
            scored += 1;
            if let Some(plan) = PlacementPlan::routed(hosts.clone(), &workload, cluster, &table) {
                let report = evaluate(&plan, cluster, mobility, &workload, &eval);
                if report.feasible() {
                    let h = report.hop_objective as f64;
                    let key = match config.mode {
                        SolveMode::Hierarchical => (h, report.total_cost),
                        SolveMode::WeightedSum => (config.hop_weight * h + report.total_cost, 0.0),
                    };
                    let better = match &best {
                        None => true,
                        Some((b, _)) => key.0 < b.0 || (key.0 == b.0 && key.1 < b.1),
                    };
                    if better {
                        let counts = workload.apps.iter().map(|a| a.counts()).collect();
                        best = Some((
                            key,
                            SolveResult {
                                solver: "bruteforce",
                                status: SolveStatus::Optimal,
                                plan: Some(plan),
                                report: Some(report),
                                workload: Some(workload.clone()),
                                instance_counts: counts,
                                elapsed_ms: 0.0,
                                nodes_explored: 0,
                            },
                        ));
                    }
                }
            }
            let mut i = 0;
            loop {
                if i == t {
                    break 'hosts;
                }
                hosts[i] += 1;
                if hosts[i] < n {
                    break;
                }
                hosts[i] = 0;
                i += 1;
            }
        }
        let mut i = 0;
        loop {
            if i == pick.len() {
                break 'combos;
            }
            pick[i] += 1;
            if pick[i] < per_app[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(match best {
        Some((_, mut r)) => {
            r.elapsed_ms = elapsed_ms;
            r.nodes_explored = scored;
            r
        }
        None => SolveResult::empty("bruteforce", SolveStatus::Infeasible, start, scored),
    })
}
