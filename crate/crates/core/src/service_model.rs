//! Service chains: type graphs, their scaled instance trees, per-edge flows
//! and multi-tenant workloads.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::NodeResources;

pub const MAX_TYPE1_COUNT: usize = 6;
/// Nominal per-camera stream rate (Kb/s) the default processing rates are sized for.
pub const NOMINAL_SOURCE_RATE: f64 = 100.0;

pub const APP_I_ALPHAS: [f64; 2] = [0.45, 0.20 / 0.45];
pub const APP_II_ALPHAS: [f64; 2] = [0.90, 0.80 / 0.90];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("type-1 count {0} outside 1..=6")]
    Type1CountOutOfRange(usize),
    #[error("type {p}: count {count} outside bounds {min}..={max}")]
    BoundsViolation {
        p: usize,
        count: usize,
        min: usize,
        max: usize,
    },
    #[error("instance t{p}[{j}] receives no inflow")]
    OrphanTI { p: usize, j: usize },
    #[error("wiring does not form an in-tree: {0}")]
    NotATree(String),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskType {
    /// 1-based position in the chain
    pub p: usize,
    pub name: String,
    pub demand: NodeResources,
    pub alpha: f64,
    /// Kb/s of inflow one instance can absorb; unused for the source type.
    pub processing_rate: f64,
    pub instance_bounds: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeGraph {
    pub name: String,
    pub chain: Vec<TaskType>,
    /// Kb/s emitted by each type-1 instance
    pub source_rate: f64,
}

impl TypeGraph {
    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.chain.len() < 2 {
            return Err(ServiceError::InvalidChain("chain needs at least two types".into()));
        }
        for (i, t) in self.chain.iter().enumerate() {
            if t.p != i + 1 {
                return Err(ServiceError::InvalidChain(format!("type {} at position {}", t.p, i + 1)));
            }
            if !(0.0..=1.0).contains(&t.alpha) {
                return Err(ServiceError::InvalidChain(format!("alpha {} on type {}", t.alpha, t.p)));
            }
            let d = t.demand;
            if d.cpu < 0.0 || d.memory < 0.0 || d.sensing < 0.0 {
                return Err(ServiceError::InvalidChain(format!("negative demand on type {}", t.p)));
            }
            if i > 0 && !(t.processing_rate > 0.0) {
                return Err(ServiceError::InvalidChain(format!("type {} has no processing rate", t.p)));
            }
            let (lo, hi) = t.instance_bounds;
            if lo < 1 || lo > hi {
                return Err(ServiceError::InvalidChain(format!("bounds on type {}", t.p)));
            }
        }
        if self.source_rate < 0.0 {
            return Err(ServiceError::InvalidChain("negative source rate".into()));
        }
        Ok(())
    }

    pub fn type1_count(&self) -> usize {
        self.chain[0].instance_bounds.0
    }

    pub fn len(&self) -> usize {
        self.chain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    /// Total flow entering type `p` (1-based) under any wiring.
    pub fn level_inflow(&self, p: usize) -> f64 {
        let mut f = self.source_rate * self.type1_count() as f64;
        for t in &self.chain[..p - 1] {
            if t.p > 1 {
                f *= t.alpha;
            }
        }
        f
    }

    /// Flow delivered to the CN.
    pub fn sink_inflow(&self) -> f64 {
        self.level_inflow(self.chain.len() + 1)
    }

    /// Caps every processing type's upper bound at `max`.
    pub fn with_max_instances(mut self, max: usize) -> Self {
        for t in self.chain.iter_mut().skip(1) {
            t.instance_bounds.1 = t.instance_bounds.1.min(max).max(t.instance_bounds.0);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AppName {
    AppI,
    AppII,
}

impl fmt::Display for AppName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AppName::AppI => "AppI",
            AppName::AppII => "AppII",
        })
    }
}

impl FromStr for AppName {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "AppI" | "app1" | "I" => Ok(AppName::AppI),
            "AppII" | "app2" | "II" => Ok(AppName::AppII),
            other => Err(ServiceError::UnknownTemplate(other.into())),
        }
    }
}

/// Pedestrian detection (AppI) or crowd-sourced video collection (AppII):
/// camera source, two processing stages, CN sink.
pub fn build_template(
    name: AppName,
    type1_count: usize,
    source_rate: f64,
) -> Result<TypeGraph, ServiceError> {
    if !(1..=MAX_TYPE1_COUNT).contains(&type1_count) {
        return Err(ServiceError::Type1CountOutOfRange(type1_count));
    }
    let source = TaskType {
        p: 1,
        name: "capture".into(),
        demand: NodeResources::new(1.0, 50.0, 1.0),
        alpha: 1.0,
        processing_rate: 0.0,
        instance_bounds: (type1_count, type1_count),
    };
    let (alphas, demands, names) = match name {
        AppName::AppI => (
            APP_I_ALPHAS,
            [NodeResources::new(2.0, 100.0, 0.0), NodeResources::new(1.0, 100.0, 0.0)],
            ["detect", "annotate"],
        ),
        AppName::AppII => (
            APP_II_ALPHAS,
            [NodeResources::new(1.0, 50.0, 0.0), NodeResources::new(1.0, 50.0, 0.0)],
            ["transcode", "package"],
        ),
    };
    let mut chain = vec![source];
    // A processing instance absorbs two nominal single-camera streams.
    let mut nominal = NOMINAL_SOURCE_RATE;
    for i in 0..2 {
        chain.push(TaskType {
            p: i + 2,
            name: names[i].into(),
            demand: demands[i],
            alpha: alphas[i],
            processing_rate: 2.0 * nominal,
            instance_bounds: (1, type1_count),
        });
        nominal *= alphas[i];
    }
    Ok(TypeGraph {
        name: name.to_string(),
        chain,
        source_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Downstream {
    Ti(usize),
    Sink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub id: usize,
    pub p: usize,
    /// replica index within its type
    pub j: usize,
    pub downstream: Downstream,
    /// Kb/s on the instance's single outgoing edge
    pub flow_out: f64,
}

impl TaskInstance {
    pub fn label(&self) -> String {
        format!("t{}[{}]", self.p, self.j)
    }
}

/// Scaled in-tree: instance ids are level-major, so every edge points from a
/// lower id to a higher id or to the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceGraph {
    pub name: String,
    pub types: Vec<TaskType>,
    pub source_rate: f64,
    pub tis: Vec<TaskInstance>,
}

impl InstanceGraph {
    pub fn task_type(&self, ti: usize) -> &TaskType {
        &self.types[self.tis[ti].p - 1]
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.types.len()];
        for t in &self.tis {
            c[t.p - 1] += 1;
        }
        c
    }

    pub fn upstream(&self, ti: usize) -> Vec<usize> {
        self.tis
            .iter()
            .filter(|t| t.downstream == Downstream::Ti(ti))
            .map(|t| t.id)
            .collect()
    }

    pub fn inflow(&self, ti: usize) -> f64 {
        self.tis
            .iter()
            .filter(|t| t.downstream == Downstream::Ti(ti))
            .map(|t| t.flow_out)
            .sum()
    }

    pub fn sink_inflow(&self) -> f64 {
        self.tis
            .iter()
            .filter(|t| t.downstream == Downstream::Sink)
            .map(|t| t.flow_out)
            .sum()
    }

    /// Instance-graph edge count (one per instance).
    pub fn edge_count(&self) -> usize {
        self.tis.len()
    }
}

/// Builds the in-tree for the given per-type counts. `wiring[p-1][j]` is the
/// replica index at type `p+1` fed by replica `j` of type `p`; the last type
/// always feeds the CN sink, so `wiring` has one entry fewer than the chain.
pub fn scale_instances(
    tg: &TypeGraph,
    counts: &[usize],
    wiring: &[Vec<usize>],
) -> Result<InstanceGraph, ServiceError> {
    tg.validate()?;
    let levels = tg.chain.len();
    if counts.len() != levels {
        return Err(ServiceError::NotATree(format!(
            "{} counts for {} types",
            counts.len(),
            levels
        )));
    }
    if wiring.len() != levels - 1 {
        return Err(ServiceError::NotATree(format!(
            "{} wiring levels for {} types",
            wiring.len(),
            levels
        )));
    }
    for (t, &c) in tg.chain.iter().zip(counts) {
        let (min, max) = t.instance_bounds;
        if c < min || c > max {
            return Err(ServiceError::BoundsViolation { p: t.p, count: c, min, max });
        }
    }
    let offsets: Vec<usize> = counts
        .iter()
        .scan(0, |acc, &c| {
            let o = *acc;
            *acc += c;
            Some(o)
        })
        .collect();

    let mut tis = Vec::with_capacity(counts.iter().sum());
    for p in 1..=levels {
        for j in 0..counts[p - 1] {
            let downstream = if p == levels {
                Downstream::Sink
            } else {
                let w = &wiring[p - 1];
                if w.len() != counts[p - 1] {
                    return Err(ServiceError::NotATree(format!(
                        "type {p} has {} instances but {} wiring entries",
                        counts[p - 1],
                        w.len()
                    )));
                }
                let target = w[j];
                if target >= counts[p] {
                    return Err(ServiceError::NotATree(format!(
                        "t{p}[{j}] wired to missing t{}[{target}]",
                        p + 1
                    )));
                }
                Downstream::Ti(offsets[p] + target)
            };
            tis.push(TaskInstance {
                id: tis.len(),
                p,
                j,
                downstream,
                flow_out: 0.0,
            });
        }
    }
    for p in 2..=levels {
        for j in 0..counts[p - 1] {
            if !wiring[p - 2].contains(&j) {
                return Err(ServiceError::OrphanTI { p, j });
            }
        }
    }
    let ig = InstanceGraph {
        name: tg.name.clone(),
        types: tg.chain.clone(),
        source_rate: tg.source_rate,
        tis,
    };
    Ok(flow_demands(&ig, tg.source_rate))
}

/// Recomputes every edge flow: sources emit `source_rate`, every processing
/// instance emits `alpha` times the sum of its inflows.
pub fn flow_demands(ig: &InstanceGraph, source_rate: f64) -> InstanceGraph {
    let mut out = ig.clone();
    out.source_rate = source_rate;
    let mut inflow = vec![0.0; out.tis.len()];
    for i in 0..out.tis.len() {
        let t = &out.tis[i];
        let f = if t.p == 1 {
            source_rate
        } else {
            out.types[t.p - 1].alpha * inflow[i]
        };
        out.tis[i].flow_out = f;
        if let Downstream::Ti(d) = out.tis[i].downstream {
            inflow[d] += f;
        }
    }
    out
}

/// Several instance graphs sharing one cluster. Instances in the same
/// share group must be co-located and their demand is counted once.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub apps: Vec<InstanceGraph>,
    offsets: Vec<usize>,
    /// share group per global instance id
    group: Vec<usize>,
}

/// A workload instance addressed globally.
#[derive(Debug, Clone, Copy)]
pub struct WorkloadTi<'a> {
    pub app: usize,
    pub ti: &'a TaskInstance,
    pub task: &'a TaskType,
}

impl Workload {
    /// Disjoint union of the given apps.
    pub fn new(apps: Vec<InstanceGraph>) -> Self {
        let mut offsets = Vec::with_capacity(apps.len());
        let mut total = 0;
        for a in &apps {
            offsets.push(total);
            total += a.tis.len();
        }
        Self {
            apps,
            offsets,
            group: (0..total).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.group.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group.is_empty()
    }

    pub fn global(&self, app: usize, local: usize) -> usize {
        self.offsets[app] + local
    }

    pub fn locate(&self, g: usize) -> (usize, usize) {
        let app = self.offsets.partition_point(|&o| o <= g) - 1;
        (app, g - self.offsets[app])
    }

    pub fn get(&self, g: usize) -> WorkloadTi<'_> {
        let (app, local) = self.locate(g);
        let ig = &self.apps[app];
        WorkloadTi {
            app,
            ti: &ig.tis[local],
            task: ig.task_type(local),
        }
    }

    /// Global id of the instance fed by `g`, `None` for the CN sink.
    pub fn downstream(&self, g: usize) -> Option<usize> {
        let (app, local) = self.locate(g);
        match self.apps[app].tis[local].downstream {
            Downstream::Ti(d) => Some(self.offsets[app] + d),
            Downstream::Sink => None,
        }
    }

    pub fn flow_out(&self, g: usize) -> f64 {
        self.get(g).ti.flow_out
    }

    pub fn inflow(&self, g: usize) -> f64 {
        let (app, local) = self.locate(g);
        self.apps[app].inflow(local)
    }

    pub fn group_of(&self, g: usize) -> usize {
        self.group[g]
    }

    /// Members of each share group, groups ordered by smallest member.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); self.len()];
        for g in 0..self.len() {
            by_root[self.group[g]].push(g);
        }
        by_root.into_iter().filter(|m| !m.is_empty()).collect()
    }
}

/// Places two tenants on one cluster. With `share`, replica `j` of a
/// processing type in `a` merges with replica `j` of the same type in `b`
/// when both types have identical demand and processing rate.
pub fn compose_multitenant(a: &InstanceGraph, b: &InstanceGraph, share: bool) -> Workload {
    let mut w = Workload::new(vec![a.clone(), b.clone()]);
    if !share {
        return w;
    }
    for (ta, tb) in a.types.iter().zip(&b.types).skip(1) {
        if ta.p != tb.p || ta.demand != tb.demand || ta.processing_rate != tb.processing_rate {
            continue;
        }
        for x in a.tis.iter().filter(|t| t.p == ta.p) {
            if let Some(y) = b.tis.iter().find(|t| t.p == tb.p && t.j == x.j) {
                let gb = w.global(1, y.id);
                w.group[gb] = w.global(0, x.id);
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(alpha2: f64, alpha3: f64) -> TypeGraph {
        let mut tg = build_template(AppName::AppI, 1, 100.0).unwrap();
        tg.chain[1].alpha = alpha2;
        tg.chain[2].alpha = alpha3;
        tg
    }

    #[test]
    fn app_templates_cumulative_reduction() {
        let t = build_template(AppName::AppI, 1, 100.0).unwrap();
        let ig = scale_instances(&t, &[1, 1, 1], &[vec![0], vec![0]]).unwrap();
        let flows: Vec<f64> = ig.tis.iter().map(|t| t.flow_out).collect();
        assert!((flows[0] - 100.0).abs() < 1e-12);
        assert!((flows[1] - 45.0).abs() < 1e-12);
        assert!((flows[2] - 20.0).abs() < 1e-12);
        let t = build_template(AppName::AppII, 1, 100.0).unwrap();
        assert!((t.sink_inflow() - 80.0).abs() < 1e-12);
        assert!(matches!(
            build_template(AppName::AppI, 7, 100.0),
            Err(ServiceError::Type1CountOutOfRange(7))
        ));
        assert!(matches!(
            "AppIII".parse::<AppName>(),
            Err(ServiceError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn identity_alphas_preserve_flow() {
        let tg = linear(1.0, 1.0);
        let ig = scale_instances(&tg, &[1, 1, 1], &[vec![0], vec![0]]).unwrap();
        assert!(ig.tis.iter().all(|t| (t.flow_out - 100.0).abs() < 1e-12));
    }

    #[test]
    fn zero_alpha_kills_flow() {
        let tg = linear(0.0, 1.0);
        let ig = scale_instances(&tg, &[1, 1, 1], &[vec![0], vec![0]]).unwrap();
        assert_eq!(ig.tis[1].flow_out, 0.0);
        assert_eq!(ig.sink_inflow(), 0.0);
    }

    #[test]
    fn three_two_one_in_tree() {
        let tg = build_template(AppName::AppI, 3, 100.0).unwrap();
        let ig = scale_instances(&tg, &[3, 2, 1], &[vec![0, 0, 1], vec![0, 0]]).unwrap();
        assert_eq!(ig.tis.len(), 6);
        assert_eq!(ig.edge_count(), 6);
        assert_eq!(ig.upstream(3), vec![0, 1]);
        assert!((ig.tis[3].flow_out - 90.0).abs() < 1e-12);
        assert!((ig.inflow(5) - 135.0).abs() < 1e-12);
        assert!((ig.sink_inflow() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn orphan_and_bounds() {
        let tg = build_template(AppName::AppI, 2, 100.0).unwrap();
        assert_eq!(
            scale_instances(&tg, &[2, 2, 1], &[vec![0, 0], vec![0, 0]]).unwrap_err(),
            ServiceError::OrphanTI { p: 2, j: 1 }
        );
        assert!(matches!(
            scale_instances(&tg, &[2, 3, 1], &[vec![0, 1], vec![0, 0, 0]]),
            Err(ServiceError::BoundsViolation { p: 2, .. })
        ));
        assert!(matches!(
            scale_instances(&tg, &[2, 1, 1], &[vec![0, 1], vec![0]]),
            Err(ServiceError::NotATree(_))
        ));
    }

    #[test]
    fn multitenant() {
        let a = scale_instances(
            &build_template(AppName::AppI, 1, 100.0).unwrap(),
            &[1, 1, 1],
            &[vec![0], vec![0]],
        )
        .unwrap();
        let b = scale_instances(
            &build_template(AppName::AppII, 1, 100.0).unwrap(),
            &[1, 1, 1],
            &[vec![0], vec![0]],
        )
        .unwrap();
        let w = compose_multitenant(&a, &b, false);
        assert_eq!(w.len(), 6);
        assert_eq!(w.groups().len(), 6);
        assert_eq!(w.downstream(w.global(1, 0)), Some(4));
        assert_eq!(w.downstream(5), None);
        // different demands never merge
        assert_eq!(compose_multitenant(&a, &b, true).groups().len(), 6);
        let w = compose_multitenant(&a, &a, true);
        assert_eq!(w.groups().len(), 4);
        assert_eq!(w.group_of(4), 1);
    }
}
