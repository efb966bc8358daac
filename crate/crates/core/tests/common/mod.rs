#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use inflim::actions::{ActionLog, Tuple};
use inflim::dag::{CreditScheme, CreditTable};
use inflim::graph::{Edge, NodeId, SocialGraph};
use inflim::problem::{Instance, TargetSet};

pub const TOL: f64 = 1e-9;

pub const XA: Edge = Edge::new(0, 1);
pub const AB: Edge = Edge::new(1, 2);
pub const XB: Edge = Edge::new(0, 2);

/// x=0, a=1, b=2; one action at times 1, 2, 3.
pub fn f1() -> Instance {
    let (g, _) = SocialGraph::from_edges(3, [XA, AB, XB]);
    let log = ActionLog::from_tuples(
        3,
        [(0, 1), (1, 2), (2, 3)].map(|(user, time)| Tuple { user, action: 0, time }),
    );
    let mut table = CreditTable::new();
    table.insert(0, XA, 0.5);
    table.insert(0, AB, 0.4);
    table.insert(0, XB, 0.3);
    Instance::new(g, log, &CreditScheme::Explicit(table)).unwrap()
}

pub fn f1_targets() -> TargetSet {
    TargetSet::new(3, [0])
}

pub fn f1_candidates() -> Vec<Edge> {
    vec![XA, XB, AB]
}

pub fn set(edges: &[Edge]) -> HashSet<Edge> {
    edges.iter().copied().collect()
}

/// Nodes of the single-action fragment used by the worked examples.
pub mod fig {
    use inflim::graph::NodeId;
    pub const V: NodeId = 0;
    pub const S: NodeId = 1;
    pub const T: NodeId = 2;
    pub const W: NodeId = 3;
    pub const X: NodeId = 4;
    pub const Y: NodeId = 5;
    pub const U: NodeId = 6;
}

/// A propagation DAG with the credit values quoted in the worked examples:
/// times v=1, s=1, t=2, w=2, x=3, y=3, u=4.
pub fn fig_fragment(removed: &[Edge]) -> Instance {
    use fig::*;
    let credits = [
        ((V, W), 0.2),
        ((W, Y), 1.0),
        ((Y, U), 0.3),
        ((V, X), 0.5),
        ((X, U), 0.2),
        ((V, U), 0.2),
        ((W, U), 0.2),
        ((T, X), 0.5),
        ((S, T), 0.5),
    ];
    let edges: Vec<Edge> = credits
        .iter()
        .map(|&((u, v), _)| Edge::new(u, v))
        .filter(|e| !removed.contains(e))
        .collect();
    let (g, _) = SocialGraph::from_edges(7, edges);
    let times = [(V, 1), (S, 1), (T, 2), (W, 2), (X, 3), (Y, 3), (U, 4)];
    let log = ActionLog::from_tuples(7, times.map(|(user, time)| Tuple { user, action: 0, time }));
    let mut table = CreditTable::new();
    for ((u, v), gamma) in credits {
        table.insert(0, Edge::new(u, v), gamma);
    }
    Instance::new(g, log, &CreditScheme::Explicit(table)).unwrap()
}

/// Random instance: up to `max_nodes` nodes, up to `max_actions` actions
/// with random performers and small time ranges (so ties occur), and random
/// direct credits whose per-node sums stay at most 1.
pub fn random_instance(seed: u64, max_nodes: usize, max_actions: usize) -> (Instance, TargetSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=max_nodes);
    let density = rng.gen_range(0.25..0.7);
    let mut edges = Vec::new();
    for u in 0..n as NodeId {
        for v in 0..n as NodeId {
            if u != v && rng.gen_bool(density) {
                edges.push(Edge::new(u, v));
            }
        }
    }
    let (graph, _) = SocialGraph::from_edges(n, edges);
    let actions = rng.gen_range(1..=max_actions);
    let mut tuples = Vec::new();
    for a in 0..actions as u64 {
        for u in 0..n as NodeId {
            if rng.gen_bool(0.75) {
                tuples.push(Tuple {
                    user: u,
                    action: a,
                    time: rng.gen_range(0..n as u64),
                });
            }
        }
    }
    let log = ActionLog::from_tuples(n, tuples);
    let raw = Instance::new(graph.clone(), log.clone(), &CreditScheme::Uniform).unwrap();
    let mut table = CreditTable::new();
    for dag in &raw.dags {
        for v in 0..dag.node_count() as u32 {
            let ins = dag.in_edges(v);
            if ins.is_empty() {
                continue;
            }
            let raw_weights: Vec<f64> = ins.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw_weights.iter().sum();
            let scale = rng.gen_range(0.3..=1.0) / total;
            for (&k, w) in ins.iter().zip(raw_weights) {
                let e = dag.global_edge(&dag.edges()[k as usize]);
                table.insert(dag.action(), e, w * scale);
            }
        }
    }
    let instance = Instance::new(graph, log, &CreditScheme::Explicit(table)).unwrap();
    let size = rng.gen_range(1..=3.min(n - 1));
    let members = rand::seq::index::sample(&mut rng, n, size).into_iter().map(|i| i as NodeId);
    let targets = TargetSet::new(n, members);
    (instance, targets)
}

/// Random instance whose default candidate list has between `min` and
/// `max` edges; the candidates are truncated to `max` when longer.
pub fn random_with_candidates(seed: u64, min: usize, max: usize) -> (Instance, TargetSet, Vec<Edge>) {
    let mut attempt = seed;
    loop {
        let (inst, x) = random_instance(attempt, 7, 3);
        let mut c = inst.default_candidates();
        if c.len() >= min {
            c.truncate(max);
            return (inst, x, c);
        }
        attempt = attempt.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    }
}

/// All subsets of `0..c` with exactly `size` members, as bit masks.
pub fn subsets_of_size(c: usize, size: usize) -> Vec<u64> {
    (0..1u64 << c).filter(|m| m.count_ones() as usize == size).collect()
}

/// Whether the index set `mask` has at most `b` candidates per head node.
pub fn mask_feasible(candidates: &[Edge], mask: u64, b: usize) -> bool {
    let mut loads = std::collections::HashMap::new();
    for (i, e) in candidates.iter().enumerate() {
        if mask >> i & 1 == 1 {
            let l = loads.entry(e.dst).or_insert(0);
            *l += 1;
            if *l > b {
                return false;
            }
        }
    }
    true
}
