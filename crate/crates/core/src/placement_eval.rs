//! Constraint checks and the mobility-weighted cost model for a concrete
//! placement.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cluster::{ClusterGraph, RESOURCE_COUNT, RESOURCE_NAMES};
use crate::mobility::ClusterMobility;
use crate::routing::RouteTable;
use crate::service_model::Workload;

/// Relative tolerance for the flow conservation check.
pub const FLOW_TOLERANCE: f64 = 1e-9;

/// Host per global instance id plus one node path per instance out-edge
/// (from the instance's host to its downstream host, or to the CN).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlacementPlan {
    pub assignment: Vec<usize>,
    pub routes: Vec<Vec<usize>>,
}

impl PlacementPlan {
    /// Fills routes from the shared route table; `None` if some pair is
    /// unreachable.
    pub fn routed(
        assignment: Vec<usize>,
        workload: &Workload,
        cluster: &ClusterGraph,
        table: &RouteTable,
    ) -> Option<Self> {
        let mut routes = Vec::with_capacity(assignment.len());
        for g in 0..workload.len() {
            let to = match workload.downstream(g) {
                Some(d) => assignment[d],
                None => cluster.cn(),
            };
            routes.push(table.path(assignment[g], to)?.to_vec());
        }
        Some(Self { assignment, routes })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// weight on link cost
    pub lambda1: f64,
    /// weight on node cost
    pub lambda2: f64,
    /// zero disables the penalty
    pub penalty_lambda: f64,
    pub p_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
            penalty_lambda: 0.0,
            p_threshold: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    AssignmentLength { expected: usize, got: usize },
    NodeOutOfRange { ti: usize, node: usize },
    NodeResource { node: usize, resource: usize, used: f64, capacity: f64 },
    SharedSplit { ti: usize, node: usize, expected: usize },
    Bandwidth { src: usize, dst: usize, used: f64, capacity: f64 },
    FlowRate { ti: usize, inflow: f64, rate: f64 },
    FlowConservation { ti: usize, expected: f64, actual: f64 },
    TaskOrder { ti: usize, from_type: usize, to_type: Option<usize> },
    RouteEndpoints { ti: usize },
    MissingLink { ti: usize, src: usize, dst: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::AssignmentLength { expected, got } => {
                write!(f, "assignment covers {got} instances, workload has {expected}")
            }
            Violation::NodeOutOfRange { ti, node } => write!(f, "instance {ti} on missing node {node}"),
            Violation::NodeResource { node, resource, used, capacity } => write!(
                f,
                "node {node} {}: {used} > {capacity}",
                RESOURCE_NAMES[*resource]
            ),
            Violation::SharedSplit { ti, node, expected } => {
                write!(f, "shared instance {ti} on node {node}, group sits on {expected}")
            }
            Violation::Bandwidth { src, dst, used, capacity } => {
                write!(f, "link {src}->{dst}: {used} Kb/s > {capacity} Kb/s")
            }
            Violation::FlowRate { ti, inflow, rate } => {
                write!(f, "instance {ti}: inflow {inflow} Kb/s > rate {rate} Kb/s")
            }
            Violation::FlowConservation { ti, expected, actual } => {
                write!(f, "instance {ti}: outflow {actual}, expected {expected}")
            }
            Violation::TaskOrder { ti, from_type, to_type } => match to_type {
                Some(t) => write!(f, "instance {ti}: type {from_type} feeds type {t}"),
                None => write!(f, "instance {ti}: type {from_type} feeds the CN early"),
            },
            Violation::RouteEndpoints { ti } => write!(f, "instance {ti}: route endpoints differ from hosts"),
            Violation::MissingLink { ti, src, dst } => {
                write!(f, "instance {ti}: route uses missing link {src}->{dst}")
            }
        }
    }
}

fn structural(plan: &PlacementPlan, cluster: &ClusterGraph, workload: &Workload) -> Vec<Violation> {
    let mut v = Vec::new();
    if plan.assignment.len() != workload.len() || plan.routes.len() != workload.len() {
        v.push(Violation::AssignmentLength {
            expected: workload.len(),
            got: plan.assignment.len().min(plan.routes.len()),
        });
        return v;
    }
    for (ti, &node) in plan.assignment.iter().enumerate() {
        if node >= cluster.len() {
            v.push(Violation::NodeOutOfRange { ti, node });
        }
    }
    for (ti, r) in plan.routes.iter().enumerate() {
        if let Some(&node) = r.iter().find(|&&x| x >= cluster.len()) {
            v.push(Violation::NodeOutOfRange { ti, node });
        }
    }
    v
}

/// Per node and resource, summed demand of the
/// hosted instances (share groups counted once) against capacity.
pub fn check_node_resources(
    plan: &PlacementPlan,
    cluster: &ClusterGraph,
    workload: &Workload,
) -> Vec<Violation> {
    let mut v = structural(plan, cluster, workload);
    if !v.is_empty() {
        return v;
    }
    let mut used = vec![[0.0; RESOURCE_COUNT]; cluster.len()];
    for members in workload.groups() {
        let host = plan.assignment[members[0]];
        for &m in &members[1..] {
            if plan.assignment[m] != host {
                v.push(Violation::SharedSplit {
                    ti: m,
                    node: plan.assignment[m],
                    expected: host,
                });
            }
        }
        let d = workload.get(members[0]).task.demand.to_array();
        for k in 0..RESOURCE_COUNT {
            used[host][k] += d[k];
        }
    }
    for (node, u) in used.iter().enumerate() {
        let cap = cluster.capacity(node).to_array();
        for k in 0..RESOURCE_COUNT {
            if u[k] > cap[k] {
                v.push(Violation::NodeResource {
                    node,
                    resource: k,
                    used: u[k],
                    capacity: cap[k],
                });
            }
        }
    }
    v
}

/// Summed Kb/s per directed link over every route hop.
pub fn link_loads(plan: &PlacementPlan, workload: &Workload) -> BTreeMap<(usize, usize), f64> {
    let mut load = BTreeMap::new();
    for (g, r) in plan.routes.iter().enumerate() {
        let f = workload.flow_out(g);
        for w in r.windows(2) {
            *load.entry((w[0], w[1])).or_insert(0.0) += f;
        }
    }
    load
}

/// Adjacent and forwarded traffic alike must fit each link.
pub fn check_bandwidth(
    plan: &PlacementPlan,
    cluster: &ClusterGraph,
    workload: &Workload,
) -> Vec<Violation> {
    let v = structural(plan, cluster, workload);
    if !v.is_empty() {
        return v;
    }
    link_loads(plan, workload)
        .into_iter()
        .filter_map(|((src, dst), used)| {
            let capacity = cluster.bandwidth(src, dst);
            (used > capacity).then_some(Violation::Bandwidth { src, dst, used, capacity })
        })
        .collect()
}

/// A processing instance (or share group) cannot take more inflow
/// than its type's processing rate.
pub fn check_flow_rate(_plan: &PlacementPlan, workload: &Workload) -> Vec<Violation> {
    let mut v = Vec::new();
    for members in workload.groups() {
        let first = workload.get(members[0]);
        if first.ti.p == 1 {
            continue;
        }
        let inflow: f64 = members.iter().map(|&m| workload.inflow(m)).sum();
        let rate = first.task.processing_rate;
        if inflow > rate {
            v.push(Violation::FlowRate {
                ti: members[0],
                inflow,
                rate,
            });
        }
    }
    v
}

/// Checked as an equality: outflow is alpha times inflow, sources emit the
/// app's source rate.
pub fn check_flow_conservation(workload: &Workload) -> Vec<Violation> {
    let mut v = Vec::new();
    for g in 0..workload.len() {
        let w = workload.get(g);
        let expected = if w.ti.p == 1 {
            workload.apps[w.app].source_rate
        } else {
            w.task.alpha * workload.inflow(g)
        };
        let actual = w.ti.flow_out;
        if (actual - expected).abs() > FLOW_TOLERANCE * expected.abs().max(1.0) {
            v.push(Violation::FlowConservation { ti: g, expected, actual });
        }
    }
    v
}

/// Each edge goes to the next type (the CN after the last),
/// and its route runs over existing links between the two hosts.
pub fn check_task_order(
    plan: &PlacementPlan,
    cluster: &ClusterGraph,
    workload: &Workload,
) -> Vec<Violation> {
    let mut v = structural(plan, cluster, workload);
    if !v.is_empty() {
        return v;
    }
    for g in 0..workload.len() {
        let w = workload.get(g);
        let last = workload.apps[w.app].types.len();
        let (to_host, to_type) = match workload.downstream(g) {
            Some(d) => (plan.assignment[d], Some(workload.get(d).ti.p)),
            None => (cluster.cn(), None),
        };
        let ok = match to_type {
            Some(t) => t == w.ti.p + 1,
            None => w.ti.p == last,
        };
        if !ok {
            v.push(Violation::TaskOrder {
                ti: g,
                from_type: w.ti.p,
                to_type,
            });
        }
        let r = &plan.routes[g];
        if r.first() != Some(&plan.assignment[g]) || r.last() != Some(&to_host) {
            v.push(Violation::RouteEndpoints { ti: g });
        }
        for hop in r.windows(2) {
            if cluster.bandwidth(hop[0], hop[1]) <= 0.0 || hop[0] == hop[1] {
                v.push(Violation::MissingLink {
                    ti: g,
                    src: hop[0],
                    dst: hop[1],
                });
            }
        }
    }
    v
}

/// Mobility-weighted resource share of one instance type on one node.
pub fn node_term(
    demand: &crate::cluster::NodeResources,
    capacity: &crate::cluster::NodeResources,
    ccp: f64,
) -> f64 {
    let d = demand.to_array();
    let c = capacity.to_array();
    let mut share = 0.0;
    for k in 0..RESOURCE_COUNT {
        if c[k] > 0.0 {
            share += d[k] / c[k];
        }
    }
    (1.0 - ccp) * share
}

fn node_costs(plan: &PlacementPlan, cluster: &ClusterGraph, mobility: &ClusterMobility, workload: &Workload) -> Vec<f64> {
    let mut per_node = vec![0.0; cluster.len()];
    for members in workload.groups() {
        let host = plan.assignment[members[0]];
        let demand = &workload.get(members[0]).task.demand;
        per_node[host] += node_term(demand, cluster.capacity(host), mobility.ccp(host));
    }
    per_node
}

/// Sum of mobility-weighted resource shares over the used hosts.
pub fn node_cost(
    plan: &PlacementPlan,
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    workload: &Workload,
) -> f64 {
    node_costs(plan, cluster, mobility, workload).iter().sum()
}

fn link_costs(
    plan: &PlacementPlan,
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    workload: &Workload,
) -> BTreeMap<(usize, usize), f64> {
    let mut per_link = BTreeMap::new();
    for (g, r) in plan.routes.iter().enumerate() {
        let f = workload.flow_out(g);
        for hop in r.windows(2) {
            let b = cluster.bandwidth(hop[0], hop[1]);
            if b > 0.0 {
                *per_link.entry((hop[0], hop[1])).or_insert(0.0) +=
                    (1.0 - mobility.joint(hop[0], hop[1])) * f / b;
            }
        }
    }
    per_link
}

/// Counts every hop on every route, host-adjacent or forwarding.
pub fn link_cost(
    plan: &PlacementPlan,
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    workload: &Workload,
) -> f64 {
    link_costs(plan, cluster, mobility, workload).values().sum()
}

/// Route hops summed over instance edges.
pub fn hop_objective(plan: &PlacementPlan) -> u32 {
    plan.routes.iter().map(|r| r.len().saturating_sub(1) as u32).sum()
}

/// Cohesion penalty, with the sign that makes risky hops cost more:
/// `lambda * max(0, threshold - P_joint)` per consecutive route pair.
pub fn penalty(plan: &PlacementPlan, mobility: &ClusterMobility, config: &EvalConfig) -> f64 {
    let mut total = 0.0;
    for r in &plan.routes {
        for hop in r.windows(2) {
            total += pair_penalty(mobility.joint(hop[0], hop[1]), config);
        }
    }
    total
}

pub fn pair_penalty(joint: f64, config: &EvalConfig) -> f64 {
    if joint < config.p_threshold {
        config.penalty_lambda * (config.p_threshold - joint)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub node_cost: f64,
    pub link_cost: f64,
    pub penalty: f64,
    pub hop_objective: u32,
    pub total_cost: f64,
    pub violations: Vec<Violation>,
    pub per_node: Vec<f64>,
    pub per_link: Vec<((usize, usize), f64)>,
}

impl CostReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// All five checks plus the cost terms; `total = l1*link + l2*node`, plus
/// the penalty when its weight is positive.
pub fn evaluate(
    plan: &PlacementPlan,
    cluster: &ClusterGraph,
    mobility: &ClusterMobility,
    workload: &Workload,
    config: &EvalConfig,
) -> CostReport {
    let structure = structural(plan, cluster, workload);
    if !structure.is_empty() {
        return CostReport {
            node_cost: 0.0,
            link_cost: 0.0,
            penalty: 0.0,
            hop_objective: 0,
            total_cost: 0.0,
            violations: structure,
            per_node: vec![0.0; cluster.len()],
            per_link: Vec::new(),
        };
    }
    let mut violations = check_node_resources(plan, cluster, workload);
    violations.extend(check_bandwidth(plan, cluster, workload));
    violations.extend(check_flow_rate(plan, workload));
    violations.extend(check_flow_conservation(workload));
    violations.extend(check_task_order(plan, cluster, workload));

    let per_node = node_costs(plan, cluster, mobility, workload);
    let per_link: Vec<_> = link_costs(plan, cluster, mobility, workload).into_iter().collect();
    let node_cost: f64 = per_node.iter().sum();
    let link_cost: f64 = per_link.iter().map(|(_, c)| c).sum();
    let pen = penalty(plan, mobility, config);
    let mut total_cost = config.lambda1 * link_cost + config.lambda2 * node_cost;
    if config.penalty_lambda > 0.0 {
        total_cost += pen;
    }
    CostReport {
        node_cost,
        link_cost,
        penalty: pen,
        hop_objective: hop_objective(plan),
        total_cost,
        violations,
        per_node,
        per_link,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{Link, Node, NodeResources};
    use crate::service_model::{build_template, compose_multitenant, scale_instances, AppName};

    fn nodes(caps: &[(f64, f64, f64)]) -> Vec<Node> {
        caps.iter()
            .enumerate()
            .map(|(i, &(c, m, s))| Node {
                id: i,
                resources: NodeResources::new(c, m, s),
                bandwidth_budget: 100.0,
                class: None,
            })
            .collect()
    }

    fn line(caps: &[(f64, f64, f64)], bw: f64) -> ClusterGraph {
        let n = caps.len();
        let links = (0..n - 1)
            .map(|i| Link { src: i, dst: i + 1, bandwidth: bw })
            .collect();
        ClusterGraph::new(nodes(caps), links, n - 1).unwrap()
    }

    fn chain_workload(source_rate: f64) -> Workload {
        let tg = build_template(AppName::AppI, 1, source_rate).unwrap();
        Workload::new(vec![scale_instances(&tg, &[1, 1, 1], &[vec![0], vec![0]]).unwrap()])
    }

    #[test]
    fn cpu_boundary_and_overflow() {
        // AppI detect stage needs 2 CPU
        let g = line(&[(1.0, 50.0, 1.0), (2.0, 200.0, 0.0), (5.0, 500.0, 0.0)], 1000.0);
        let w = chain_workload(100.0);
        let m = ClusterMobility::new(vec![1.0; 3]);
        let table = RouteTable::new(&g, &m);
        let plan = PlacementPlan::routed(vec![0, 1, 2], &w, &g, &table).unwrap();
        assert!(check_node_resources(&plan, &g, &w).is_empty());
        let g2 = line(&[(1.0, 50.0, 1.0), (2.0, 200.0, 0.0), (3.0, 500.0, 0.0)], 1000.0);
        let plan = PlacementPlan::routed(vec![0, 1, 1], &w, &g2, &table).unwrap();
        let v = check_node_resources(&plan, &g2, &w);
        assert!(v.contains(&Violation::NodeResource { node: 1, resource: 0, used: 3.0, capacity: 2.0 }));
    }

    #[test]
    fn bandwidth_boundary() {
        let g = line(&[(1.0, 50.0, 1.0), (5.0, 500.0, 0.0)], 100.0);
        let w = chain_workload(100.0);
        let m = ClusterMobility::new(vec![1.0; 2]);
        let t = RouteTable::new(&g, &m);
        let plan = PlacementPlan::routed(vec![0, 1, 1], &w, &g, &t).unwrap();
        assert!(check_bandwidth(&plan, &g, &w).is_empty());
        let w2 = chain_workload(120.0);
        let v = check_bandwidth(&plan, &g, &w2);
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn node_and_link_terms() {
        let cap = NodeResources::new(5.0, 0.0, 0.0);
        assert_eq!(node_term(&NodeResources::new(2.0, 0.0, 0.0), &cap, 1.0), 0.0);
        assert!((node_term(&NodeResources::new(2.0, 0.0, 0.0), &cap, 0.5) - 0.2).abs() < 1e-15);
        // memory demand on a memory-less node is excluded from the ratio
        assert!((node_term(&NodeResources::new(2.0, 9.0, 0.0), &cap, 0.5) - 0.2).abs() < 1e-15);

        let g = line(&[(1.0, 50.0, 1.0), (5.0, 500.0, 0.0)], 200.0);
        let w = chain_workload(100.0);
        let m = ClusterMobility::new(vec![0.5, 1.0]);
        let t = RouteTable::new(&g, &m);
        let plan = PlacementPlan::routed(vec![0, 1, 1], &w, &g, &t).unwrap();
        // single hop, P_joint 0.5, F/B 0.5
        assert!((link_cost(&plan, &g, &m, &w) - 0.25).abs() < 1e-15);
        assert_eq!(hop_objective(&plan), 1);
    }

    #[test]
    fn penalty_cases() {
        let cfg = EvalConfig { penalty_lambda: 10.0, ..EvalConfig::default() };
        assert_eq!(pair_penalty(0.6, &cfg), 0.0);
        assert!((pair_penalty(0.4, &cfg) - 2.0).abs() < 1e-12);
        let off = EvalConfig::default();
        assert_eq!(pair_penalty(0.1, &off), 0.0);
    }

    #[test]
    fn order_and_conservation_violations() {
        let g = line(&[(1.0, 50.0, 1.0), (5.0, 500.0, 0.0)], 1000.0);
        let m = ClusterMobility::new(vec![1.0; 2]);
        let t = RouteTable::new(&g, &m);
        let mut w = chain_workload(100.0);
        let plan = PlacementPlan::routed(vec![0, 1, 1], &w, &g, &t).unwrap();
        w.apps[0].tis[1].flow_out = 50.0;
        assert_eq!(check_flow_conservation(&w).len(), 2);
        let mut w = chain_workload(100.0);
        w.apps[0].tis[1].downstream = crate::service_model::Downstream::Ti(1);
        let v = check_task_order(&plan, &g, &w);
        assert!(v.iter().any(|x| matches!(x, Violation::TaskOrder { ti: 1, .. })));
    }

    #[test]
    fn shared_demand_counted_once() {
        let g = line(
            &[(1.0, 50.0, 1.0), (1.0, 50.0, 1.0), (1.0, 50.0, 0.0), (5.0, 500.0, 0.0)],
            1000.0,
        );
        let m = ClusterMobility::new(vec![0.5; 4]);
        let a = scale_instances(
            &build_template(AppName::AppII, 1, 50.0).unwrap(),
            &[1, 1, 1],
            &[vec![0], vec![0]],
        )
        .unwrap();
        let w = compose_multitenant(&a, &a, true);
        let t = RouteTable::new(&g, &m);
        // sources on 0 and 1, both transcode replicas on 2, packaging on the CN
        let plan = PlacementPlan::routed(vec![0, 2, 3, 1, 2, 3], &w, &g, &t).unwrap();
        assert!(check_node_resources(&plan, &g, &w).is_empty());
        let split = compose_multitenant(&a, &a, false);
        assert!(!check_node_resources(&plan, &g, &split).is_empty());
        let cfg = EvalConfig::default();
        let shared = evaluate(&plan, &g, &m, &w, &cfg);
        let apart = evaluate(&plan, &g, &m, &split, &cfg);
        assert!(shared.node_cost < apart.node_cost);
    }
}
