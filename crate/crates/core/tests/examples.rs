//! Worked values for the three-node fixture and the seven-node fragment.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use inflim::actions::{generate_ic_actions, EdgeProb};
use inflim::bil::{greedy_bil, GreedyOptions};
use inflim::credit::{delta_set, sigma_from_dags, CreditStore, DeltaEvaluator, UcRows};
use inflim::graph::{Edge, SocialGraph};
use inflim::harness::{baseline_high_degree, concentration_report, di_metric};
use inflim::ilm::{cg_weights, continuous_greedy, max_weight_independent, multilinear_exact, CgConfig};
use inflim::problem::TargetSet;
use inflim::rounding::{randomized_round, swap_round};

/// Candidate order `((x,a), (a,b), (x,b))`.
const C: [Edge; 3] = [XA, AB, XB];

#[test]
fn f1_influence_and_deletions() {
    let inst = f1();
    let x = f1_targets();
    let sigma = sigma_from_dags(&inst.dags, &x, &inst.log);
    assert!((sigma - 2.0).abs() < TOL);
    let store = CreditStore::build(&inst.dags, &x, &inst.log, UcRows::All).unwrap();
    assert!((store.delta_single(XA) - 0.7).abs() < TOL);
    assert!((store.delta_single(XB) - 0.3).abs() < TOL);
    let sol = greedy_bil(&inst, &x, &f1_candidates(), 2, &GreedyOptions::default()).unwrap();
    assert!((sol.total_delta - 1.0).abs() < TOL);
    let after = sigma - delta_set(&inst, &x, &set(&sol.edges)).unwrap();
    assert!((di_metric(sigma, after).unwrap() - 50.0).abs() < TOL);
    assert_eq!(concentration_report(&sol.edges).unwrap(), 100.0);
}

#[test]
fn fragment_after_two_deletions() {
    use common::fig::*;
    let cut = fig_fragment(&[Edge::new(Y, U), Edge::new(X, U)]);
    let x = TargetSet::new(7, [V, W]);
    assert!((sigma_from_dags(&cut.dags, &x, &cut.log) - 3.9).abs() < TOL);
}

#[test]
fn fragment_marginal_of_w_to_y() {
    use common::fig::*;
    let inst = fig_fragment(&[]);
    let x = TargetSet::new(7, [V]);
    let store = CreditStore::build(&inst.dags, &x, &inst.log, UcRows::All).unwrap();
    let e = Edge::new(W, Y);
    let terms = store.edge_terms(e);
    let downstream: f64 = terms.iter().filter(|t| t.node != Y).map(|t| t.value).sum();
    assert!((downstream - 0.06).abs() < TOL);
    // the full change also counts y's own credit of 0.2
    assert!((store.delta_single(e) - 0.26).abs() < TOL);
    assert!((delta_set(&inst, &x, &set(&[e])).unwrap() - 0.26).abs() < TOL);
}

#[test]
fn f1_extension_values() {
    let inst = f1();
    let eval = DeltaEvaluator::new(&inst.dags, &f1_targets(), &inst.log, &C);
    assert_eq!(multilinear_exact(&eval, &[0.0; 3]).unwrap(), 0.0);
    assert!((multilinear_exact(&eval, &[1.0; 3]).unwrap() - 1.0).abs() < TOL);
    assert!((multilinear_exact(&eval, &[1.0, 0.0, 0.0]).unwrap() - 0.7).abs() < TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let w = cg_weights(&eval, &[0.0; 3], 4, &mut rng);
    for (got, want) in w.iter().zip([0.7, 0.2, 0.3]) {
        assert!((got - want).abs() < TOL);
    }
    assert!(cg_weights(&eval, &[1.0; 3], 4, &mut rng).iter().all(|&v| v == 0.0));
    assert_eq!(max_weight_independent(&w, &C, None, 1, None), vec![0, 2]);
}

#[test]
fn f1_continuous_greedy() {
    let inst = f1();
    let eval = DeltaEvaluator::new(&inst.dags, &f1_targets(), &inst.log, &C);
    let sol = continuous_greedy(&eval, 1, &CgConfig { tau: 100, samples: 50, seed: 0, max_edges: None }).unwrap();
    assert!(sol.y[0] > 0.99);
    assert!(sol.y[1] + sol.y[2] <= 1.0 + 1e-9);
    assert!(multilinear_exact(&eval, &sol.y).unwrap() >= 0.9);
    let single = continuous_greedy(&eval, 1, &CgConfig { tau: 1, samples: 5, seed: 0, max_edges: None }).unwrap();
    assert_eq!(single.y, vec![1.0, 0.0, 1.0]);
}

#[test]
fn f1_rounding() {
    let inst = f1();
    let eval = DeltaEvaluator::new(&inst.dags, &f1_targets(), &inst.log, &C);
    let y = [1.0, 0.5, 0.5];
    let r = randomized_round(&eval, &y, 1, 50, 0, None).unwrap();
    assert!((r.delta - 1.0).abs() < TOL);
    assert_eq!(r.edges, vec![XA, XB]);

    let runs = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut with_xb = 0;
    for _ in 0..runs {
        let set = swap_round(&C, &y, 1, &mut rng).unwrap();
        assert!(set.contains(&0) && set.len() == 2);
        with_xb += set.contains(&2) as usize;
    }
    let freq = with_xb as f64 / runs as f64;
    assert!((freq - 0.5).abs() <= 3.0 * (0.25 / runs as f64).sqrt(), "{freq}");
}

#[test]
fn f1_high_degree_baseline() {
    let inst = f1();
    assert_eq!(baseline_high_degree(&inst.graph, &f1_targets(), 2), vec![XA, XB]);
}

#[test]
fn f1_certain_cascade() {
    let (g, _) = SocialGraph::from_edges(3, C);
    let log = generate_ic_actions(&g, 12, 1, &EdgeProb::Uniform(1.0), 5).unwrap();
    let from_x = (0..log.action_count())
        .map(|i| log.performers(i))
        .find(|p| p.iter().any(|&(u, t)| u == 0 && t == 0))
        .expect("some action seeded at x");
    let mut times = from_x.to_vec();
    times.sort();
    assert_eq!(times, vec![(0, 0), (1, 1), (2, 1)]);
}
