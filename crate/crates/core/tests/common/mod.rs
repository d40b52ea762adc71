#![allow(dead_code)]

use vfc_place::cluster::{
    generate_cluster_with, ClusterGraph, ClusterOptions, ClusterProfile, Node, NodeResources,
};
use vfc_place::mobility::ClusterMobility;
use vfc_place::rng::SeededRng;
use vfc_place::service_model::{build_template, AppName, TypeGraph};
use vfc_place::solver::SolverConfig;

pub struct Instance {
    pub cluster: ClusterGraph,
    pub mobility: ClusterMobility,
    pub templates: Vec<TypeGraph>,
    pub config: SolverConfig,
}

/// Small random instance: 3 to 5 nodes, at most two replicas per type.
pub fn small_instance(seed: u64) -> Instance {
    let mut rng = SeededRng::new(seed ^ 0x5eed);
    let n = 3 + rng.below(3);
    let base = generate_cluster_with(&ClusterOptions {
        profile: if rng.chance(0.5) { ClusterProfile::Rich } else { ClusterProfile::Poor },
        n,
        link_density: 0.3 + 0.6 * rng.next_f64(),
        seed,
        asymmetric: rng.chance(0.3),
        camera_fraction: 0.8,
    })
    .unwrap();
    let cpus = [1.0, 2.0, 3.0, 5.0];
    let mems = [50.0, 100.0, 250.0, 500.0];
    let nodes: Vec<Node> = base
        .nodes()
        .iter()
        .map(|x| Node {
            resources: NodeResources::new(
                cpus[rng.below(4)],
                mems[rng.below(4)],
                x.resources.sensing,
            ),
            ..x.clone()
        })
        .collect();
    let links = base
        .links()
        .iter()
        .map(|l| vfc_place::cluster::Link {
            bandwidth: [150.0, 300.0, 2000.0][rng.below(3)],
            ..*l
        })
        .collect();
    let cluster = ClusterGraph::new(nodes, links, base.cn()).unwrap();
    let mobility = ClusterMobility::new((0..n).map(|_| rng.uniform(0.2, 1.0)).collect());
    let rate = [50.0, 100.0, 150.0][rng.below(3)];
    let app = if rng.chance(0.5) { AppName::AppI } else { AppName::AppII };
    let templates = if rng.chance(0.7) {
        vec![build_template(app, 1 + rng.below(2), rate).unwrap()]
    } else {
        vec![
            build_template(AppName::AppI, 1, rate).unwrap(),
            build_template(AppName::AppII, 1, rate).unwrap(),
        ]
    };
    let lambda1 = [0.0, 0.25, 0.5, 0.75, 1.0][rng.below(5)];
    let config = SolverConfig {
        lambda1,
        lambda2: 1.0 - lambda1,
        penalty_lambda: if rng.chance(0.5) { 10.0 } else { 0.0 },
        max_instances: Some(2),
        ..SolverConfig::default()
    };
    Instance { cluster, mobility, templates, config }
}
