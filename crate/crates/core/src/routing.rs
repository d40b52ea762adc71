//! Fixed route choice between any two hosts: fewest hops, then the path whose
//! weakest joint CCP is largest, then the lexicographically smallest path.

use crate::cluster::ClusterGraph;
use crate::mobility::ClusterMobility;

#[derive(Debug, Clone)]
pub struct RouteTable {
    /// `paths[a][b]`, `None` when `b` is unreachable from `a`
    paths: Vec<Vec<Option<Vec<usize>>>>,
}

impl RouteTable {
    pub fn new(cluster: &ClusterGraph, mobility: &ClusterMobility) -> Self {
        let n = cluster.len();
        let hops = cluster.hop_counts();
        let mut paths = vec![vec![None; n]; n];
        for (a, row) in paths.iter_mut().enumerate() {
            for (b, slot) in row.iter_mut().enumerate() {
                if let Some(d) = hops.get(a, b) {
                    *slot = Some(best_path(cluster, mobility, a, b, d));
                }
            }
        }
        Self { paths }
    }

    pub fn path(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.paths[a][b].as_deref()
    }
}

fn best_path(
    g: &ClusterGraph,
    mobility: &ClusterMobility,
    a: usize,
    b: usize,
    d: u32,
) -> Vec<usize> {
    let hops = g.hop_counts();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cur = vec![a];
    // Only walk edges that stay on some shortest a->b path.
    fn walk(
        g: &ClusterGraph,
        mobility: &ClusterMobility,
        b: usize,
        d: u32,
        weakest: f64,
        cur: &mut Vec<usize>,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        let u = *cur.last().unwrap();
        if u == b {
            let better = match best {
                None => true,
                Some((w, _)) => weakest > *w,
            };
            if better {
                *best = Some((weakest, cur.clone()));
            }
            return;
        }
        let walked = (cur.len() - 1) as u32;
        for &v in g.out_neighbors(u) {
            if g.hop_counts().get(v, b) == Some(d - walked - 1) {
                cur.push(v);
                let w = weakest.min(mobility.joint(u, v));
                walk(g, mobility, b, d, w, cur, best);
                cur.pop();
            }
        }
    }
    debug_assert_eq!(hops.get(a, b), Some(d));
    walk(g, mobility, b, d, f64::INFINITY, &mut cur, &mut best);
    best.expect("reachable pair has a path").1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{Link, Node, NodeResources};

    fn diamond(ccp: Vec<f64>) -> (ClusterGraph, ClusterMobility) {
        let nodes = (0..4)
            .map(|i| Node {
                id: i,
                resources: NodeResources::new(2.0, 100.0, 0.0),
                bandwidth_budget: 100.0,
                class: None,
            })
            .collect();
        let links = [(0, 1), (0, 2), (1, 3), (2, 3)]
            .iter()
            .map(|&(src, dst)| Link {
                src,
                dst,
                bandwidth: 100.0,
            })
            .collect();
        (
            ClusterGraph::new(nodes, links, 3).unwrap(),
            ClusterMobility::new(ccp),
        )
    }

    #[test]
    fn prefers_cohesive_relay() {
        let (g, m) = diamond(vec![1.0, 0.3, 0.9, 1.0]);
        let r = RouteTable::new(&g, &m);
        assert_eq!(r.path(0, 3).unwrap(), &[0, 2, 3]);
        assert_eq!(r.path(3, 3).unwrap(), &[3]);
        assert!(r.path(3, 0).is_none());
    }

    #[test]
    fn ties_break_lexicographically() {
        let (g, m) = diamond(vec![1.0, 0.5, 0.5, 1.0]);
        let r = RouteTable::new(&g, &m);
        assert_eq!(r.path(0, 3).unwrap(), &[0, 1, 3]);
    }
}
