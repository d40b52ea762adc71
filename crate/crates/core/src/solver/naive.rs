//! Capacity-greedy baseline: one dedicated processing chain per camera
//! stream, each instance on the roomiest node that still fits, CCP ignored.

use std::time::Instant;

use super::{prepare, SolveError, SolveResult, SolveStatus, SolverConfig};
use crate::cluster::{ClusterGraph, RESOURCE_COUNT};
use crate::mobility::ClusterMobility;
use crate::placement_eval::{evaluate, PlacementPlan};
use crate::routing::RouteTable;
use crate::service_model::{scale_instances, TypeGraph, Workload};

pub fn solve_naive(
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    templates: &[TypeGraph],
    config: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let templates = prepare(cluster, mobility, templates, config)?;
    let n = cluster.len();
    let infeasible = |steps| SolveResult::empty("naive", SolveStatus::Infeasible, start, steps);

    // shortest routes chosen without looking at cohesion
    let table = RouteTable::new(cluster, &ClusterMobility::new(vec![1.0; n]));

    let mut apps = Vec::new();
    for tg in &templates {
        let k = tg.type1_count();
        let counts: Vec<usize> = tg.chain.iter().map(|t| k.min(t.instance_bounds.1)).collect();
        let wiring: Vec<Vec<usize>> = counts
            .windows(2)
            .map(|w| (0..w[0]).map(|j| j % w[1]).collect())
            .collect();
        match scale_instances(tg, &counts, &wiring) {
            Ok(ig) => apps.push(ig),
            Err(_) => return Ok(infeasible(0)),
        }
    }
    let workload = Workload::new(apps);

    let mut peak = [0.0f64; RESOURCE_COUNT];
    for node in cluster.nodes() {
        let c = node.resources.to_array();
        for k in 0..RESOURCE_COUNT {
            peak[k] = peak[k].max(c[k]);
        }
    }
    let mut left: Vec<[f64; RESOURCE_COUNT]> =
        cluster.nodes().iter().map(|x| x.resources.to_array()).collect();
    let mut bw_left: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| cluster.bandwidth(a, b)).collect())
        .collect();
    let mut hosts = vec![usize::MAX; workload.len()];
    let mut steps = 0u64;

    // instance ids are level-major per app, so upstream hosts are known
    for g in 0..workload.len() {
        let w = workload.get(g);
        let demand = w.task.demand.to_array();
        let upstream: Vec<usize> = (0..g).filter(|&u| workload.downstream(u) == Some(g)).collect();
        let inflow: f64 = upstream.iter().map(|&u| workload.flow_out(u)).sum();
        if w.ti.p > 1 && inflow > w.task.processing_rate {
            return Ok(infeasible(steps));
        }
        let mut choice: Option<(f64, f64, usize)> = None;
        for h in 0..n {
            steps += 1;
            if (0..RESOURCE_COUNT).any(|k| demand[k] > left[h][k]) {
                continue;
            }
            if !routes_fit(&upstream, &hosts, h, &workload, &table, &bw_left) {
                continue;
            }
            let room: f64 = (0..RESOURCE_COUNT)
                .filter(|&k| peak[k] > 0.0)
                .map(|k| (left[h][k] - demand[k]) / peak[k])
                .sum();
            let radio: f64 = cluster.out_neighbors(h).iter().map(|&v| bw_left[h][v]).sum();
            let better = match choice {
                None => true,
                Some((r, b, _)) => room > r || (room == r && radio > b),
            };
            if better {
                choice = Some((room, radio, h));
            }
        }
        let Some((_, _, h)) = choice else {
            return Ok(infeasible(steps));
        };
        hosts[g] = h;
        for k in 0..RESOURCE_COUNT {
            left[h][k] -= demand[k];
        }
        for &u in &upstream {
            let path = table.path(hosts[u], h).expect("checked reachable");
            for hop in path.windows(2) {
                bw_left[hop[0]][hop[1]] -= workload.flow_out(u);
            }
        }
    }

    let plan = match PlacementPlan::routed(hosts, &workload, cluster, &table) {
        Some(p) => p,
        None => return Ok(infeasible(steps)),
    };
    let report = evaluate(&plan, cluster, mobility, &workload, &config.eval());
    if !report.feasible() {
        return Ok(infeasible(steps));
    }
    Ok(SolveResult {
        solver: "naive",
        status: SolveStatus::Feasible,
        instance_counts: workload.apps.iter().map(|a| a.counts()).collect(),
        plan: Some(plan),
        report: Some(report),
        workload: Some(workload),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        nodes_explored: steps,
    })
}

fn routes_fit(
    upstream: &[usize],
    hosts: &[usize],
    h: usize,
    workload: &Workload,
    table: &RouteTable,
    bw_left: &[Vec<f64>],
) -> bool {
    let mut extra = std::collections::BTreeMap::new();
    for &u in upstream {
        let Some(path) = table.path(hosts[u], h) else {
            return false;
        };
        for hop in path.windows(2) {
            *extra.entry((hop[0], hop[1])).or_insert(0.0) += workload.flow_out(u);
        }
    }
    extra.iter().all(|(&(a, b), &f)| f <= bw_left[a][b])
}
