mod common;

use std::collections::HashSet;

use proptest::prelude::*;

use common::*;
use inflim::bil::{compute_mc, greedy_bil, greedy_grr, greedy_on_store, prune_dominated, GreedyOptions};
use inflim::credit::{delta_set, CreditStore, DeltaEvaluator, UcRows};
use inflim::graph::Edge;
use inflim::rounding::feasible;

const EAGER: GreedyOptions = GreedyOptions {
    use_pruning: false,
    use_lazy: false,
    per_node_limit: None,
};
const LAZY: GreedyOptions = GreedyOptions {
    use_pruning: false,
    use_lazy: true,
    per_node_limit: None,
};
const PRUNED: GreedyOptions = GreedyOptions {
    use_pruning: true,
    use_lazy: false,
    per_node_limit: None,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn incremental_store_tracks_rebuilds(seed in any::<u64>()) {
        let (inst, x, c) = random_with_candidates(seed, 2, 40);
        let k = 5.min(c.len() - 1);
        let mut store = CreditStore::build(&inst.dags, &x, &inst.log, UcRows::All).unwrap();
        let mut removed = HashSet::new();
        let mut worst: f64 = 0.0;
        greedy_on_store(&mut store, &c, k, &EAGER, |s, e| {
            removed.insert(e);
            let fresh = CreditStore::build_without(&inst.dags, &x, &inst.log, UcRows::All, &removed).unwrap();
            worst = worst.max(s.max_deviation(&fresh));
        });
        prop_assert!(worst <= TOL, "deviation {}", worst);
    }

    #[test]
    fn marginal_is_the_set_difference(seed in any::<u64>()) {
        let (inst, x, c) = random_with_candidates(seed, 2, 40);
        let k = 3.min(c.len() - 1);
        let mut store = CreditStore::build(&inst.dags, &x, &inst.log, UcRows::HeadsOf(&c)).unwrap();
        let sol = greedy_on_store(&mut store, &c, k, &EAGER, |_, _| {});
        let chosen = set(&sol.edges);
        let base = delta_set(&inst, &x, &chosen).unwrap();
        for &e in c.iter().filter(|e| !chosen.contains(e)) {
            let mut more = chosen.clone();
            more.insert(e);
            let want = delta_set(&inst, &x, &more).unwrap() - base;
            prop_assert!((compute_mc(&store, e) - want).abs() <= TOL);
        }
    }

    #[test]
    fn lazy_picks_the_same_sequence(seed in any::<u64>()) {
        let (inst, x, c) = random_with_candidates(seed, 2, 40);
        let k = 6.min(c.len() - 1);
        let eager = greedy_bil(&inst, &x, &c, k, &EAGER).unwrap();
        let lazy = greedy_bil(&inst, &x, &c, k, &LAZY).unwrap();
        prop_assert_eq!(eager.edges, lazy.edges);
    }

    #[test]
    fn gains_do_not_increase_and_sum_to_delta(seed in any::<u64>()) {
        let (inst, x, c) = random_with_candidates(seed, 2, 40);
        let k = 6.min(c.len() - 1);
        let sol = greedy_bil(&inst, &x, &c, k, &LAZY).unwrap();
        prop_assert!(sol.len() <= k);
        for w in sol.gain_per_step.windows(2) {
            prop_assert!(w[1] <= w[0] + TOL);
        }
        let sum: f64 = sol.gain_per_step.iter().sum();
        prop_assert!((sum - sol.total_delta).abs() <= TOL);
        let reference = delta_set(&inst, &x, &set(&sol.edges)).unwrap();
        prop_assert!((reference - sol.total_delta).abs() <= TOL);
    }

    #[test]
    fn pruning_keeps_the_value(seed in any::<u64>()) {
        let (inst, x, c) = random_with_candidates(seed, 2, 40);
        let k = 5.min(c.len() - 1);
        let plain = greedy_bil(&inst, &x, &c, k, &EAGER).unwrap();
        let pruned = greedy_bil(&inst, &x, &c, k, &PRUNED).unwrap();
        prop_assert!((plain.total_delta - pruned.total_delta).abs() <= TOL,
            "plain {} pruned {}", plain.total_delta, pruned.total_delta);
    }

    #[test]
    fn dominated_edges_lose_their_marginal(seed in any::<u64>()) {
        let (inst, x, c) = random_with_candidates(seed, 2, 40);
        let store = CreditStore::build(&inst.dags, &x, &inst.log, UcRows::HeadsOf(&c)).unwrap();
        let pruned = prune_dominated(&store, &c);
        prop_assert_eq!(pruned.kept.len() + pruned.dominated.len(), c.len());
        for &(dominated, by) in &pruned.dominated {
            let after = delta_set(&inst, &x, &set(&[by, dominated])).unwrap() - delta_set(&inst, &x, &set(&[by])).unwrap();
            prop_assert!(after.abs() <= TOL);
        }
    }

    #[test]
    fn greedy_is_within_the_approximation_bound(seed in any::<u64>()) {
        let (inst, x, c) = random_with_candidates(seed, 3, 12);
        let k = 1 + (seed % 4) as usize;
        prop_assume!(k < c.len());
        let eval = DeltaEvaluator::new(&inst.dags, &x, &inst.log, &c);
        let best = subsets_of_size(c.len(), k).into_iter().map(|m| eval.delta_mask(m)).fold(0.0, f64::max);
        let sol = greedy_bil(&inst, &x, &c, k, &LAZY).unwrap();
        prop_assert!(sol.total_delta >= (1.0 - (-1.0f64).exp()) * best - TOL);
    }

    #[test]
    fn grr_respects_the_bound(seed in any::<u64>(), b in 1usize..3) {
        let (inst, x, c) = random_with_candidates(seed, 2, 40);
        let sol = greedy_grr(&inst, &x, &c, b).unwrap();
        prop_assert!(feasible(&sol.edges, b));
        let reference = delta_set(&inst, &x, &set(&sol.edges)).unwrap();
        prop_assert!((reference - sol.total_delta).abs() <= TOL);
    }
}

#[test]
fn f1_greedy() {
    let inst = f1();
    let x = f1_targets();
    let c = f1_candidates();
    let one = greedy_bil(&inst, &x, &c, 1, &EAGER).unwrap();
    assert_eq!(one.edges, vec![XA]);
    assert!((one.total_delta - 0.7).abs() < TOL);
    let two = greedy_bil(&inst, &x, &c, 2, &EAGER).unwrap();
    assert_eq!(two.edges, vec![XA, XB]);
    assert!((two.total_delta - 1.0).abs() < TOL);
}

#[test]
fn f1_dominance() {
    let inst = f1();
    let c = [XA, AB];
    let store = CreditStore::build(&inst.dags, &f1_targets(), &inst.log, UcRows::HeadsOf(&c)).unwrap();
    let pruned = prune_dominated(&store, &c);
    assert_eq!(pruned.dominated, vec![(AB, XA)]);
}

#[test]
fn ties_go_to_the_smallest_edge() {
    // x=0 feeds 1, 2 and 3 with equal credit; every marginal is equal
    let (g, _) = inflim::SocialGraph::from_edges(4, [Edge::new(0, 1), Edge::new(0, 2), Edge::new(0, 3)]);
    let log = inflim::ActionLog::from_tuples(
        4,
        [(0, 0), (1, 1), (2, 1), (3, 1)].map(|(user, time)| inflim::Tuple { user, action: 0, time }),
    );
    let inst = inflim::Instance::new(g, log, &inflim::CreditScheme::Uniform).unwrap();
    let x = inflim::TargetSet::new(4, [0]);
    let c = inst.default_candidates();
    for opts in [EAGER, LAZY] {
        let sol = greedy_bil(&inst, &x, &c, 2, &opts).unwrap();
        assert_eq!(sol.edges, vec![Edge::new(0, 1), Edge::new(0, 2)]);
    }
}
