//! Vehicle-cluster infrastructure graph: node capacities, directed links,
//! control node (CN) and hop distances.

use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobility::ClusterMobility;
use crate::rng::SeededRng;

pub const RESOURCE_COUNT: usize = 3;
pub const RESOURCE_NAMES: [&str; RESOURCE_COUNT] = ["cpu", "memory", "sensing"];

/// Share of the other nodes a CN candidate must reach in one hop.
pub const CN_COVERAGE: f64 = 0.7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("cluster needs at least 3 nodes, got {0}")]
    TooSmall(usize),
    #[error("link density must be in (0,1], got {0}")]
    InvalidDensity(f64),
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
    #[error("csv: {0}")]
    Csv(String),
}

/// Capacity (or demand) vector over CPU, memory and sensing.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeResources {
    pub cpu: f64,
    /// Mb
    pub memory: f64,
    pub sensing: f64,
}

impl NodeResources {
    pub const fn new(cpu: f64, memory: f64, sensing: f64) -> Self {
        Self {
            cpu,
            memory,
            sensing,
        }
    }

    pub fn get(&self, k: usize) -> f64 {
        match k {
            0 => self.cpu,
            1 => self.memory,
            2 => self.sensing,
            _ => panic!("resource index {k} out of range"),
        }
    }

    pub fn to_array(self) -> [f64; RESOURCE_COUNT] {
        [self.cpu, self.memory, self.sensing]
    }

    pub fn scaled(self, c: f64) -> Self {
        Self::new(self.cpu * c, self.memory * c, self.sensing * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeClass {
    Large,
    Medium,
    Small,
}

impl NodeClass {
    pub const ALL: [NodeClass; 3] = [NodeClass::Large, NodeClass::Medium, NodeClass::Small];

    /// CPU units, memory in Mb, radio budget in Kb/s.
    pub fn spec(self) -> (f64, f64, f64) {
        match self {
            NodeClass::Large => (5.0, 500.0, 6000.0),
            NodeClass::Medium => (3.0, 250.0, 4000.0),
            NodeClass::Small => (2.0, 100.0, 2000.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterProfile {
    Rich,
    Poor,
}

impl ClusterProfile {
    /// Large / medium / small shares.
    pub fn mix(self) -> [f64; 3] {
        match self {
            ClusterProfile::Rich => [0.5, 0.25, 0.25],
            ClusterProfile::Poor => [0.25, 0.5, 0.25],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClusterProfile::Rich => "rich",
            ClusterProfile::Poor => "poor",
        }
    }
}

/// Largest-remainder apportionment of `n` over `shares`; ties go to the
/// earlier class.
pub fn apportion(n: usize, shares: &[f64]) -> Vec<usize> {
    let total: f64 = shares.iter().sum();
    let quotas: Vec<f64> = shares.iter().map(|s| s / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub resources: NodeResources,
    /// Kb/s
    pub bandwidth_budget: f64,
    pub class: Option<NodeClass>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub src: usize,
    pub dst: usize,
    /// Kb/s
    pub bandwidth: f64,
}

/// All-pairs directed hop distances; `None` is unreachable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HopMatrix {
    pub dist: Vec<Vec<Option<u32>>>,
}

impl HopMatrix {
    pub fn get(&self, a: usize, b: usize) -> Option<u32> {
        self.dist[a][b]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClusterViolation {
    SelfLink(usize),
    CnUnreachable(usize),
    NegativeCapacity(usize),
    NonPositiveBandwidth { src: usize, dst: usize },
    DuplicateLink { src: usize, dst: usize },
}

#[derive(Debug, Clone)]
pub struct ClusterGraph {
    nodes: Vec<Node>,
    links: Vec<Link>,
    cn: usize,
    /// `bw[a][b]`, zero where there is no link
    bw: Vec<Vec<f64>>,
    out: Vec<Vec<usize>>,
    hops: HopMatrix,
}

impl ClusterGraph {
    /// Assembles a graph without judging it; see [`validate`].
    pub fn new(nodes: Vec<Node>, links: Vec<Link>, cn: usize) -> Result<Self, ClusterError> {
        let n = nodes.len();
        if cn >= n {
            return Err(ClusterError::NodeOutOfRange(cn));
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.id != i {
                return Err(ClusterError::NodeOutOfRange(node.id));
            }
        }
        let mut bw = vec![vec![0.0; n]; n];
        let mut out = vec![Vec::new(); n];
        for l in &links {
            if l.src >= n {
                return Err(ClusterError::NodeOutOfRange(l.src));
            }
            if l.dst >= n {
                return Err(ClusterError::NodeOutOfRange(l.dst));
            }
            if l.bandwidth > 0.0 && l.src != l.dst && bw[l.src][l.dst] == 0.0 {
                out[l.src].push(l.dst);
            }
            if l.bandwidth > 0.0 {
                bw[l.src][l.dst] = l.bandwidth;
            }
        }
        for o in &mut out {
            o.sort_unstable();
        }
        let hops = bfs_all_pairs(&out);
        Ok(Self {
            nodes,
            links,
            cn,
            bw,
            out,
            hops,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn cn(&self) -> usize {
        self.cn
    }

    pub fn capacity(&self, node: usize) -> &NodeResources {
        &self.nodes[node].resources
    }

    /// Link bandwidth in Kb/s, zero when absent.
    pub fn bandwidth(&self, a: usize, b: usize) -> f64 {
        self.bw[a][b]
    }

    pub fn out_neighbors(&self, node: usize) -> &[usize] {
        &self.out[node]
    }

    pub fn hop_counts(&self) -> &HopMatrix {
        &self.hops
    }

    pub fn has_camera(&self, node: usize) -> bool {
        self.nodes[node].resources.sensing > 0.0
    }

    /// Same topology with every node capacity and link bandwidth times `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                resources: n.resources.scaled(c),
                bandwidth_budget: n.bandwidth_budget * c,
                ..n.clone()
            })
            .collect();
        let links = self
            .links
            .iter()
            .map(|l| Link {
                bandwidth: l.bandwidth * c,
                ..*l
            })
            .collect();
        Self::new(nodes, links, self.cn).expect("scaling keeps ids valid")
    }

    /// Writes `id,cpu,memory_mb,sensing,bandwidth_kbps,ccp`.
    pub fn write_nodes_csv<W: Write>(
        &self,
        mobility: &ClusterMobility,
        out: W,
    ) -> Result<(), ClusterError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "cpu", "memory_mb", "sensing", "bandwidth_kbps", "ccp"])
            .map_err(csv_err)?;
        for n in &self.nodes {
            w.write_record([
                n.id.to_string(),
                n.resources.cpu.to_string(),
                n.resources.memory.to_string(),
                n.resources.sensing.to_string(),
                n.bandwidth_budget.to_string(),
                mobility.ccp(n.id).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| ClusterError::Csv(e.to_string()))
    }

    /// Writes `src,dst,bandwidth_kbps`.
    pub fn write_links_csv<W: Write>(&self, out: W) -> Result<(), ClusterError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["src", "dst", "bandwidth_kbps"]).map_err(csv_err)?;
        for l in &self.links {
            w.write_record([l.src.to_string(), l.dst.to_string(), l.bandwidth.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| ClusterError::Csv(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> ClusterError {
    ClusterError::Csv(e.to_string())
}

#[derive(Deserialize)]
struct NodeRow {
    id: usize,
    cpu: f64,
    memory_mb: f64,
    sensing: f64,
    bandwidth_kbps: f64,
    ccp: f64,
}

#[derive(Deserialize)]
struct LinkRow {
    src: usize,
    dst: usize,
    bandwidth_kbps: f64,
}

/// Loads a hand-built fixture from the node and link CSVs.
pub fn read_cluster_csv<R1: Read, R2: Read>(
    nodes: R1,
    links: R2,
    cn: usize,
) -> Result<(ClusterGraph, ClusterMobility), ClusterError> {
    let mut rows: Vec<NodeRow> = csv::Reader::from_reader(nodes)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(csv_err)?;
    rows.sort_by_key(|r| r.id);
    let ccp = rows.iter().map(|r| r.ccp).collect();
    let nodes = rows
        .into_iter()
        .map(|r| Node {
            id: r.id,
            resources: NodeResources::new(r.cpu, r.memory_mb, r.sensing),
            bandwidth_budget: r.bandwidth_kbps,
            class: None,
        })
        .collect();
    let links = csv::Reader::from_reader(links)
        .deserialize::<LinkRow>()
        .map(|r| {
            r.map(|r| Link {
                src: r.src,
                dst: r.dst,
                bandwidth: r.bandwidth_kbps,
            })
        })
        .collect::<Result<_, _>>()
        .map_err(csv_err)?;
    Ok((ClusterGraph::new(nodes, links, cn)?, ClusterMobility::new(ccp)))
}

fn bfs_all_pairs(out: &[Vec<usize>]) -> HopMatrix {
    let n = out.len();
    let mut dist = vec![vec![None; n]; n];
    let mut queue = VecDeque::new();
    for (s, row) in dist.iter_mut().enumerate() {
        row[s] = Some(0);
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            let du = row[u].unwrap();
            for &v in &out[u] {
                if row[v].is_none() {
                    row[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
    }
    HopMatrix { dist }
}

/// Free function form of [`ClusterGraph::hop_counts`].
pub fn hop_counts(g: &ClusterGraph) -> HopMatrix {
    g.hops.clone()
}

/// Lists every broken invariant; empty means valid.
pub fn validate(g: &ClusterGraph) -> Vec<ClusterViolation> {
    let mut v = Vec::new();
    let n = g.len();
    let mut seen = vec![vec![false; n]; n];
    for l in &g.links {
        if l.src == l.dst {
            v.push(ClusterViolation::SelfLink(l.src));
        }
        if !(l.bandwidth > 0.0) {
            v.push(ClusterViolation::NonPositiveBandwidth {
                src: l.src,
                dst: l.dst,
            });
        }
        if seen[l.src][l.dst] {
            v.push(ClusterViolation::DuplicateLink {
                src: l.src,
                dst: l.dst,
            });
        }
        seen[l.src][l.dst] = true;
    }
    for node in &g.nodes {
        let r = &node.resources;
        if r.cpu < 0.0 || r.memory < 0.0 || r.sensing < 0.0 || node.bandwidth_budget < 0.0 {
            v.push(ClusterViolation::NegativeCapacity(node.id));
        }
    }
    for i in 0..n {
        if g.hops.get(i, g.cn).is_none() {
            v.push(ClusterViolation::CnUnreachable(i));
        }
    }
    v
}

/// Knobs for [`generate_cluster_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterOptions {
    pub profile: ClusterProfile,
    pub n: usize,
    pub link_density: f64,
    pub seed: u64,
    /// Generate each link independently per direction.
    pub asymmetric: bool,
    /// Share of non-CN nodes carrying a camera.
    pub camera_fraction: f64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            profile: ClusterProfile::Rich,
            n: 10,
            link_density: 0.4,
            seed: 1,
            asymmetric: false,
            camera_fraction: 0.8,
        }
    }
}

pub fn generate_cluster(
    profile: ClusterProfile,
    n: usize,
    link_density: f64,
    seed: u64,
) -> Result<ClusterGraph, ClusterError> {
    generate_cluster_with(&ClusterOptions {
        profile,
        n,
        link_density,
        seed,
        ..ClusterOptions::default()
    })
}

pub fn generate_cluster_with(opts: &ClusterOptions) -> Result<ClusterGraph, ClusterError> {
    let n = opts.n;
    if n < 3 {
        return Err(ClusterError::TooSmall(n));
    }
    if !(opts.link_density > 0.0 && opts.link_density <= 1.0) {
        return Err(ClusterError::InvalidDensity(opts.link_density));
    }
    let mut rng = SeededRng::new(opts.seed);

    let counts = apportion(n, &opts.profile.mix());
    let mut classes: Vec<NodeClass> = NodeClass::ALL
        .iter()
        .zip(&counts)
        .flat_map(|(c, &k)| std::iter::repeat(*c).take(k))
        .collect();
    rng.shuffle(&mut classes);

    let mut adj = vec![vec![false; n]; n];
    for a in 0..n {
        for b in 0..n {
            if a == b || (!opts.asymmetric && b < a) {
                continue;
            }
            if rng.chance(opts.link_density) {
                adj[a][b] = true;
                if !opts.asymmetric {
                    adj[b][a] = true;
                }
            }
        }
    }

    let degree: Vec<usize> = adj.iter().map(|r| r.iter().filter(|x| **x).count()).collect();
    let needed = (CN_COVERAGE * (n - 1) as f64).ceil() as usize;
    let cn = (0..n).find(|&i| degree[i] >= needed).unwrap_or_else(|| {
        let max = *degree.iter().max().unwrap();
        (0..n).find(|&i| degree[i] == max).unwrap()
    });

    // Minimal augmentation: wire each stranded node straight to the CN.
    loop {
        let reach = reaches(&adj, cn);
        match (0..n).find(|&i| !reach[i]) {
            None => break,
            Some(u) => {
                adj[u][cn] = true;
                if !opts.asymmetric {
                    adj[cn][u] = true;
                }
            }
        }
    }

    let mut others: Vec<usize> = (0..n).filter(|&i| i != cn).collect();
    rng.shuffle(&mut others);
    let cameras = (opts.camera_fraction * (n - 1) as f64).round() as usize;
    let mut sensing = vec![0.0; n];
    for &i in others.iter().take(cameras) {
        sensing[i] = 1.0;
    }

    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let (cpu, mem, budget) = classes[i].spec();
            Node {
                id: i,
                resources: NodeResources::new(cpu, mem, sensing[i]),
                bandwidth_budget: budget,
                class: Some(classes[i]),
            }
        })
        .collect();
    let mut links = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if adj[a][b] {
                links.push(Link {
                    src: a,
                    dst: b,
                    bandwidth: nodes[a].bandwidth_budget.min(nodes[b].bandwidth_budget),
                });
            }
        }
    }
    ClusterGraph::new(nodes, links, cn)
}

/// Which nodes have a directed path to `target`.
fn reaches(adj: &[Vec<bool>], target: usize) -> Vec<bool> {
    let n = adj.len();
    let mut seen = vec![false; n];
    seen[target] = true;
    let mut stack = vec![target];
    while let Some(v) = stack.pop() {
        for u in 0..n {
            if adj[u][v] && !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> ClusterGraph {
        let nodes = (0..n)
            .map(|i| Node {
                id: i,
                resources: NodeResources::new(2.0, 100.0, 1.0),
                bandwidth_budget: 1000.0,
                class: None,
            })
            .collect();
        let links = (0..n - 1)
            .map(|i| Link {
                src: i,
                dst: i + 1,
                bandwidth: 1000.0,
            })
            .collect();
        ClusterGraph::new(nodes, links, n - 1).unwrap()
    }

    #[test]
    fn mix_counts() {
        assert_eq!(apportion(10, &ClusterProfile::Rich.mix()), vec![5, 3, 2]);
        assert_eq!(apportion(8, &ClusterProfile::Poor.mix()), vec![2, 4, 2]);
        assert_eq!(apportion(10, &ClusterProfile::Poor.mix()), vec![3, 5, 2]);
        let g = generate_cluster(ClusterProfile::Poor, 8, 0.4, 3).unwrap();
        let large = g
            .nodes()
            .iter()
            .filter(|n| n.class == Some(NodeClass::Large))
            .count();
        assert_eq!(large, 2);
    }

    #[test]
    fn chain_hops() {
        let g = line(3);
        assert_eq!(g.hop_counts().get(0, 2), Some(2));
        assert_eq!(g.hop_counts().get(2, 0), None);
        for i in 0..3 {
            assert_eq!(g.hop_counts().get(i, i), Some(0));
        }
        assert!(validate(&g).is_empty());
    }

    #[test]
    fn violations() {
        let mut nodes: Vec<Node> = line(3).nodes().to_vec();
        nodes.push(Node {
            id: 3,
            ..nodes[0].clone()
        });
        let links = vec![
            Link { src: 0, dst: 1, bandwidth: 10.0 },
            Link { src: 1, dst: 2, bandwidth: 10.0 },
            Link { src: 1, dst: 1, bandwidth: 10.0 },
        ];
        let g = ClusterGraph::new(nodes, links, 2).unwrap();
        let v = validate(&g);
        assert!(v.contains(&ClusterViolation::SelfLink(1)));
        assert!(v.contains(&ClusterViolation::CnUnreachable(3)));
    }

    #[test]
    fn generated_is_valid_and_deterministic() {
        for seed in 0..50 {
            for profile in [ClusterProfile::Rich, ClusterProfile::Poor] {
                let g = generate_cluster(profile, 10, 0.3, seed).unwrap();
                assert!(validate(&g).is_empty(), "seed {seed}");
                let h = generate_cluster(profile, 10, 0.3, seed).unwrap();
                assert_eq!(g.links(), h.links());
                assert_eq!(g.nodes(), h.nodes());
                assert_eq!(g.cn(), h.cn());
                assert!(!g.has_camera(g.cn()));
                assert_eq!((0..10).filter(|&i| g.has_camera(i)).count(), 7);
            }
        }
    }

    #[test]
    fn link_bandwidth_is_min_budget() {
        let g = generate_cluster(ClusterProfile::Rich, 10, 0.5, 9).unwrap();
        for l in g.links() {
            let a = g.nodes()[l.src].bandwidth_budget;
            let b = g.nodes()[l.dst].bandwidth_budget;
            assert_eq!(l.bandwidth, a.min(b));
            assert_eq!(g.bandwidth(l.dst, l.src), l.bandwidth);
        }
    }

    #[test]
    fn too_small() {
        assert_eq!(
            generate_cluster(ClusterProfile::Rich, 2, 0.5, 0).unwrap_err(),
            ClusterError::TooSmall(2)
        );
        assert!(generate_cluster(ClusterProfile::Rich, 5, 0.0, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = generate_cluster(ClusterProfile::Poor, 6, 0.5, 2).unwrap();
        let m = ClusterMobility::new(vec![0.5, 0.25, 0.75, 1.0, 0.5, 0.125]);
        let mut nodes = Vec::new();
        let mut links = Vec::new();
        g.write_nodes_csv(&m, &mut nodes).unwrap();
        g.write_links_csv(&mut links).unwrap();
        let (h, m2) = read_cluster_csv(&nodes[..], &links[..], g.cn()).unwrap();
        assert_eq!(h.links(), g.links());
        assert_eq!(m2.values(), m.values());
        for (a, b) in h.nodes().iter().zip(g.nodes()) {
            assert_eq!(a.resources, b.resources);
        }
    }
}
