use proptest::prelude::*;
use vfc_place::cluster::{generate_cluster, ClusterProfile};
use vfc_place::mobility::{sample_profile, ClusterMobility, MobilityKind};
use vfc_place::placement_eval::{evaluate, EvalConfig, PlacementPlan};
use vfc_place::routing::RouteTable;
use vfc_place::service_model::{build_template, scale_instances, AppName, Workload};

fn fixture(seed: u64) -> (vfc_place::cluster::ClusterGraph, ClusterMobility, Workload) {
    let g = generate_cluster(ClusterProfile::Rich, 10, 0.4, seed).unwrap();
    let m = ClusterMobility::anchored(&sample_profile(MobilityKind::Stable, 10, seed).unwrap(), g.cn());
    let tg = build_template(AppName::AppI, 3, 100.0).unwrap();
    let ig = scale_instances(&tg, &[3, 2, 1], &[vec![0, 0, 1], vec![0, 0]]).unwrap();
    (g, m, Workload::new(vec![ig]))
}

proptest! {
    #[test]
    fn costs_match_summation_oracle(seed in 0u64..500, hosts in prop::collection::vec(0usize..10, 6)) {
        let (g, m, w) = fixture(seed);
        let table = RouteTable::new(&g, &m);
        let plan = PlacementPlan::routed(hosts.clone(), &w, &g, &table).unwrap();
        let cfg = EvalConfig { penalty_lambda: 10.0, ..EvalConfig::default() };
        let rep = evaluate(&plan, &g, &m, &w, &cfg);

        // per node: each instance adds (1 - ccp) * sum of demand/capacity shares
        let mut per_node = vec![0.0; 10];
        for (ti, &h) in hosts.iter().enumerate() {
            let d = w.get(ti).task.demand;
            let c = g.capacity(h);
            let mut s = d.cpu / c.cpu + d.memory / c.memory;
            if c.sensing > 0.0 {
                s += d.sensing / c.sensing;
            }
            per_node[h] += (1.0 - m.ccp(h)) * s;
        }
        for h in 0..10 {
            prop_assert!((rep.per_node[h] - per_node[h]).abs() <= 1e-9 * per_node[h].max(1.0));
        }

        let (mut link, mut pen, mut hops) = (0.0, 0.0, 0);
        for (ti, r) in plan.routes.iter().enumerate() {
            hops += r.len() - 1;
            for hop in r.windows(2) {
                let j = m.ccp(hop[0]) * m.ccp(hop[1]);
                link += (1.0 - j) * w.flow_out(ti) / g.bandwidth(hop[0], hop[1]);
                pen += 10.0 * (0.6 - j).max(0.0);
            }
        }
        prop_assert!((rep.link_cost - link).abs() <= 1e-9 * link.max(1.0));
        prop_assert!((rep.penalty - pen).abs() <= 1e-9 * pen.max(1.0));
        prop_assert_eq!(rep.hop_objective as usize, hops);
        let total = 0.5 * link + 0.5 * per_node.iter().sum::<f64>() + pen;
        prop_assert!((rep.total_cost - total).abs() <= 1e-9 * total.max(1.0));
    }

    #[test]
    fn costs_fall_as_cohesion_rises(seed in 0u64..500, hosts in prop::collection::vec(0usize..10, 6), bump in 0.0f64..0.5) {
        let (g, m, w) = fixture(seed);
        let table = RouteTable::new(&g, &m);
        let plan = PlacementPlan::routed(hosts, &w, &g, &table).unwrap();
        let up = ClusterMobility::new(m.values().iter().map(|c| (c + bump).min(1.0)).collect());
        let cfg = EvalConfig { penalty_lambda: 10.0, ..EvalConfig::default() };
        let a = evaluate(&plan, &g, &m, &w, &cfg);
        let b = evaluate(&plan, &g, &up, &w, &cfg);
        prop_assert!(b.node_cost <= a.node_cost + 1e-12);
        prop_assert!(b.link_cost <= a.link_cost + 1e-12);
        prop_assert!(b.penalty <= a.penalty + 1e-12);
    }

    #[test]
    fn costs_scale_inversely_with_capacity(seed in 0u64..500, hosts in prop::collection::vec(0usize..10, 6), c in 0.1f64..20.0) {
        let (g, m, w) = fixture(seed);
        let table = RouteTable::new(&g, &m);
        let plan = PlacementPlan::routed(hosts, &w, &g, &table).unwrap();
        let a = evaluate(&plan, &g, &m, &w, &EvalConfig::default());
        let b = evaluate(&plan, &g.scaled(c), &m, &w, &EvalConfig::default());
        prop_assert!((b.node_cost * c - a.node_cost).abs() <= 1e-9 * a.node_cost.max(1e-12));
        prop_assert!((b.link_cost * c - a.link_cost).abs() <= 1e-9 * a.link_cost.max(1e-12));
    }

    #[test]
    fn evaluation_is_deterministic(seed in 0u64..500, hosts in prop::collection::vec(0usize..10, 6)) {
        let (g, m, w) = fixture(seed);
        let table = RouteTable::new(&g, &m);
        let plan = PlacementPlan::routed(hosts, &w, &g, &table).unwrap();
        let a = evaluate(&plan, &g, &m, &w, &EvalConfig::default());
        let b = evaluate(&plan, &g, &m, &w, &EvalConfig::default());
        prop_assert_eq!(a, b);
    }
}
