mod common;

use std::time::Instant;

use vfc_place::placement_eval::evaluate;
use vfc_place::solver::{solve_bruteforce, solve_hierarchical, SolveStatus};

#[test]
fn exact_search_matches_exhaustive_oracle() {
    let t0 = Instant::now();
    let mut feasible = 0;
    for seed in 0..200u64 {
        let inst = common::small_instance(seed);
        let fast = solve_hierarchical(&inst.cluster, &inst.mobility, &inst.templates, &inst.config).unwrap();
        let slow = solve_bruteforce(&inst.cluster, &inst.mobility, &inst.templates, &inst.config).unwrap();
        assert_eq!(fast.status.has_plan(), slow.status.has_plan(), "seed {seed}");
        if fast.status == SolveStatus::Optimal {
            feasible += 1;
            let (a, b) = (fast.report.as_ref().unwrap(), slow.report.as_ref().unwrap());
            assert_eq!(a.hop_objective, b.hop_objective, "seed {seed}");
            assert!(
                (a.total_cost - b.total_cost).abs() <= 1e-9 * b.total_cost.abs().max(1.0),
                "seed {seed}: {} vs {}",
                a.total_cost,
                b.total_cost
            );
            let again = evaluate(
                fast.plan.as_ref().unwrap(),
                &inst.cluster,
                &inst.mobility,
                fast.workload.as_ref().unwrap(),
                &inst.config.eval(),
            );
            assert!(again.violations.is_empty());
        }
    }
    eprintln!("{feasible} feasible of 200 in {:?}", t0.elapsed());
    assert!(feasible > 100);
}
