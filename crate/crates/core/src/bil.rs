//! Budgeted influence limitation: greedy edge deletion over a credit store.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::credit::{CreditStore, UcRows};
use crate::error::{Error, Result};
use crate::graph::{Edge, NodeId};
use crate::problem::{Instance, TargetSet};

/// Relative slack used when comparing marginals and dominance products.
pub const TIE_EPS: f64 = 1e-12;

/// Removed edges in pick order with the marginal gain of each pick.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Solution {
    pub edges: Vec<Edge>,
    pub gain_per_step: Vec<f64>,
    pub total_delta: f64,
}

impl Solution {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Running totals of `gain_per_step`.
    pub fn cumulative(&self) -> Vec<f64> {
        self.gain_per_step
            .iter()
            .scan(0.0, |acc, g| {
                *acc += g;
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GreedyOptions {
    /// Drop dominated candidates before the first pick.
    pub use_pruning: bool,
    /// Lazy re-evaluation of stale marginals from a priority queue.
    pub use_lazy: bool,
    /// Skip candidates whose head already has this many removed in-edges.
    pub per_node_limit: Option<usize>,
}

/// Marginal reduction of `σ_cd` from removing `e` given the current store:
/// `Σ_a SC[u][a]·EP[u][v][a]·Σ_w UC[v][w][a]/|A_w|`, read from the cached
/// row sums. Zero for edges with no live occurrence.
pub fn compute_mc(store: &CreditStore<'_>, e: Edge) -> f64 {
    let mut mc = 0.0;
    for &(a, k) in store.occurrences(e) {
        let (a, k) = (a as usize, k as usize);
        let ep = store.edge_credit(a, k);
        let edge = store.dags()[a].edges()[k];
        let sc = store.local_sc(a, edge.tail);
        if sc > 0.0 && ep > 0.0 {
            mc += sc * ep * store.row_weight(a, edge.head);
        }
    }
    mc
}

fn tie_tol(best: f64) -> f64 {
    TIE_EPS * best.abs().max(1.0)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_EPS * a.abs().max(b.abs()).max(1.0)
}

/// Candidates that survive dominance pruning, and the removed ones as
/// `(dominated, dominator)` pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Pruned {
    pub kept: Vec<Edge>,
    pub dominated: Vec<(Edge, Edge)>,
}

/// Removes every candidate `e' = (w, x)` that some other candidate
/// `e* = (u, v)` dominates: in each action where `e'` carries credit
/// (`SC[w] > 0`), `e*` is live and `SC[w] = SC[u]·γ_{(u,v)}·UC[v][w]`. Once
/// `e*` is deleted `e'` can no longer reduce influence. Edges that carry no
/// credit anywhere are kept, and a dominator must itself carry credit.
pub fn prune_dominated(store: &CreditStore<'_>, candidates: &[Edge]) -> Pruned {
    let dags = store.dags();
    let positions: HashMap<Edge, usize> = candidates.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    // Live credit-carrying occurrences `(action, tail SC · EP)` per candidate.
    let carries = |e: Edge| -> Vec<(usize, usize)> {
        store
            .occurrences(e)
            .iter()
            .map(|&(a, k)| (a as usize, k as usize))
            .filter(|&(a, k)| {
                let tail = dags[a].edges()[k].tail;
                store.local_sc(a, tail) > 0.0 && store.edge_credit(a, k) > 0.0
            })
            .collect()
    };
    let dominator_of = |target: Edge| -> Option<Edge> {
        let occ = carries(target);
        let (&(a0, k0), rest) = occ.split_first()?;
        let dag = &dags[a0];
        let w = dag.edges()[k0].tail;
        let sc_w = store.local_sc(a0, w);
        let w_node = dag.node(w);
        let mut options: Vec<Edge> = dag
            .edges()
            .iter()
            .enumerate()
            .filter_map(|(k, de)| {
                let e = dag.global_edge(de);
                if e == target || !positions.contains_key(&e) {
                    return None;
                }
                let ep = store.edge_credit(a0, k);
                let lead = store.local_sc(a0, de.tail) * ep;
                if lead <= 0.0 {
                    return None;
                }
                let through = lead * store.uc(dag.node(de.head), w_node, a0);
                close(sc_w, through).then_some(e)
            })
            .collect();
        options.sort_unstable();
        options.into_iter().find(|&dom| {
            rest.iter().all(|&(a, k)| {
                let dag = &dags[a];
                let w = dag.edges()[k].tail;
                let Some(j) = dag.find_edge(dom) else {
                    return false;
                };
                let de = dag.edges()[j];
                let through = store.local_sc(a, de.tail)
                    * store.edge_credit(a, j)
                    * store.uc(dom.dst, dag.node(w), a);
                through > 0.0 && close(store.local_sc(a, w), through)
            })
        })
    };
    let verdicts: Vec<Option<Edge>> = candidates.par_iter().map(|&e| dominator_of(e)).collect();
    let mut pruned = Pruned::default();
    for (&e, dom) in candidates.iter().zip(verdicts) {
        match dom {
            Some(d) => pruned.dominated.push((e, d)),
            None => pruned.kept.push(e),
        }
    }
    pruned
}

/// Greedy deletion of up to `k` edges from `candidates` maximising the
/// reduction of `σ_cd(G, X)`. Ties go to the lexicographically smallest edge.
pub fn greedy_bil(
    instance: &Instance,
    targets: &TargetSet,
    candidates: &[Edge],
    k: usize,
    options: &GreedyOptions,
) -> Result<Solution> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate set is empty"));
    }
    if k >= candidates.len() {
        return Err(Error::invalid(format!(
            "budget k={k} must be smaller than the candidate count {}",
            candidates.len()
        )));
    }
    let mut store = CreditStore::build(&instance.dags, targets, &instance.log, UcRows::HeadsOf(candidates))?;
    Ok(greedy_on_store(&mut store, candidates, k, options, |_, _| {}))
}

/// Greedy under a per-node bound `b` on removed in-edges, picking while some
/// feasible candidate still has a positive marginal.
pub fn greedy_grr(instance: &Instance, targets: &TargetSet, candidates: &[Edge], b: usize) -> Result<Solution> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate set is empty"));
    }
    if b == 0 {
        return Err(Error::invalid("per-node bound b must be at least 1"));
    }
    let mut store = CreditStore::build(&instance.dags, targets, &instance.log, UcRows::HeadsOf(candidates))?;
    let options = GreedyOptions {
        use_lazy: true,
        per_node_limit: Some(b),
        ..GreedyOptions::default()
    };
    let mut solution = greedy_on_store(&mut store, candidates, candidates.len(), &options, |_, _| {});
    while solution.gain_per_step.last().is_some_and(|&g| g <= 0.0) {
        solution.edges.pop();
        solution.gain_per_step.pop();
    }
    solution.total_delta = solution.gain_per_step.iter().sum();
    Ok(solution)
}

/// The greedy loop on a prepared store, which is left in the post-removal
/// state. `on_step` sees the store after each pick. Stops early when no
/// eligible candidate remains.
pub fn greedy_on_store<F>(
    store: &mut CreditStore<'_>,
    candidates: &[Edge],
    k: usize,
    options: &GreedyOptions,
    mut on_step: F,
) -> Solution
where
    F: FnMut(&CreditStore<'_>, Edge),
{
    let mut pool: Vec<Edge> = if options.use_pruning {
        prune_dominated(store, candidates).kept
    } else {
        candidates.to_vec()
    };
    pool.sort_unstable();
    pool.dedup();
    let mut loads: HashMap<NodeId, usize> = HashMap::new();
    let admissible = |e: &Edge, loads: &HashMap<NodeId, usize>| match options.per_node_limit {
        Some(b) => loads.get(&e.dst).copied().unwrap_or(0) < b,
        None => true,
    };
    let mut solution = Solution::default();
    let mut lazy = options.use_lazy.then(|| LazyQueue::new(store, &pool));
    for round in 1..=k {
        let pick = match lazy.as_mut() {
            Some(queue) => queue.pop_best(store, round, |e| admissible(e, &loads)),
            None => {
                pool.retain(|e| admissible(e, &loads));
                eager_best(store, &pool)
            }
        };
        let Some((e, gain)) = pick else { break };
        pool.retain(|&c| c != e);
        store.remove_edge(e);
        *loads.entry(e.dst).or_default() += 1;
        solution.edges.push(e);
        solution.gain_per_step.push(gain);
        solution.total_delta += gain;
        on_step(store, e);
    }
    solution
}

fn eager_best(store: &CreditStore<'_>, pool: &[Edge]) -> Option<(Edge, f64)> {
    let gains: Vec<f64> = pool.par_iter().map(|&e| compute_mc(store, e)).collect();
    let best = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = best - tie_tol(best);
    pool.iter()
        .zip(&gains)
        .find(|(_, &g)| g >= threshold)
        .map(|(&e, &g)| (e, g))
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    bound: f64,
    edge: Edge,
    round: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.edge.cmp(&self.edge))
    }
}

/// Max-heap of marginal upper bounds. A bound computed in an earlier round
/// stays an upper bound because marginals only shrink as edges are removed.
struct LazyQueue {
    heap: BinaryHeap<Entry>,
}

impl LazyQueue {
    fn new(store: &CreditStore<'_>, pool: &[Edge]) -> Self {
        let heap = pool
            .par_iter()
            .map(|&edge| Entry {
                bound: compute_mc(store, edge),
                edge,
                round: 1,
            })
            .collect::<Vec<_>>()
            .into();
        LazyQueue { heap }
    }

    /// Same choice as an eager scan: the smallest edge among those whose
    /// current marginal is within the tie tolerance of the maximum.
    fn pop_best<P>(&mut self, store: &CreditStore<'_>, round: usize, admissible: P) -> Option<(Edge, f64)>
    where
        P: Fn(&Edge) -> bool,
    {
        let best = loop {
            let top = *self.heap.peek()?;
            if !admissible(&top.edge) {
                self.heap.pop();
                continue;
            }
            if top.round == round {
                break top.bound;
            }
            self.heap.pop();
            self.heap.push(Entry {
                bound: compute_mc(store, top.edge),
                edge: top.edge,
                round,
            });
        };
        let threshold = best - tie_tol(best);
        let mut near = Vec::new();
        while let Some(&top) = self.heap.peek() {
            if top.bound < threshold {
                break;
            }
            self.heap.pop();
            if !admissible(&top.edge) {
                continue;
            }
            let fresh = if top.round == round {
                top
            } else {
                Entry {
                    bound: compute_mc(store, top.edge),
                    edge: top.edge,
                    round,
                }
            };
            near.push(fresh);
        }
        let (chosen, rest): (Vec<Entry>, Vec<Entry>) = {
            let pick = near
                .iter()
                .filter(|e| e.bound >= threshold)
                .map(|e| e.edge)
                .min()
                .expect("the fresh maximum is within the tolerance");
            near.into_iter().partition(|e| e.edge == pick)
        };
        self.heap.extend(rest);
        chosen.first().map(|e| (e.edge, e.bound))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{ActionLog, Tuple};
    use crate::credit::delta_set;
    use crate::dag::{CreditScheme, CreditTable};
    use crate::graph::SocialGraph;
    use std::collections::HashSet;

    const TOL: f64 = 1e-9;
    const XA: Edge = Edge::new(0, 1);
    const AB: Edge = Edge::new(1, 2);
    const XB: Edge = Edge::new(0, 2);

    fn f1() -> Instance {
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

    fn x() -> TargetSet {
        TargetSet::new(3, [0])
    }

    fn c() -> Vec<Edge> {
        vec![XA, XB, AB]
    }

    #[test]
    fn marginals_on_f1() {
        let inst = f1();
        let mut store = CreditStore::build(&inst.dags, &x(), &inst.log, UcRows::HeadsOf(&c())).unwrap();
        assert!((compute_mc(&store, XA) - 0.7).abs() < TOL);
        assert_eq!(compute_mc(&store, Edge::new(2, 1)), 0.0);
        store.remove_edge(XA);
        assert_eq!(compute_mc(&store, AB), 0.0);
        assert!((compute_mc(&store, XB) - 0.3).abs() < TOL);
    }

    #[test]
    fn greedy_on_f1() {
        let inst = f1();
        for lazy in [false, true] {
            let opts = GreedyOptions {
                use_lazy: lazy,
                ..Default::default()
            };
            let one = greedy_bil(&inst, &x(), &c(), 1, &opts).unwrap();
            assert_eq!(one.edges, vec![XA]);
            assert!((one.total_delta - 0.7).abs() < TOL);
            let two = greedy_bil(&inst, &x(), &c(), 2, &opts).unwrap();
            assert_eq!(two.edges, vec![XA, XB]);
            assert!((two.total_delta - 1.0).abs() < TOL);
            assert!((two.cumulative()[1] - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn greedy_rejects_bad_budget() {
        let inst = f1();
        let opts = GreedyOptions::default();
        assert!(greedy_bil(&inst, &x(), &c(), 3, &opts).is_err());
        assert!(greedy_bil(&inst, &x(), &[], 0, &opts).is_err());
    }

    #[test]
    fn zero_marginals_still_fill_budget() {
        let inst = f1();
        // X = {b}: nothing downstream of b, every marginal is zero
        let xb = TargetSet::new(3, [2]);
        let sol = greedy_bil(&inst, &xb, &c(), 2, &GreedyOptions::default()).unwrap();
        assert_eq!(sol.edges, vec![XA, XB]);
        assert_eq!(sol.gain_per_step, vec![0.0, 0.0]);
        assert_eq!(sol.total_delta, 0.0);
    }

    #[test]
    fn dominance_on_f1() {
        let inst = f1();
        let pair = [XA, AB];
        let store = CreditStore::build(&inst.dags, &x(), &inst.log, UcRows::HeadsOf(&pair)).unwrap();
        let pruned = prune_dominated(&store, &pair);
        assert_eq!(pruned.kept, vec![XA]);
        assert_eq!(pruned.dominated, vec![(AB, XA)]);
        let single = prune_dominated(&store, &[XB]);
        assert_eq!(single.kept, vec![XB]);
    }

    #[test]
    fn parallel_routes_are_not_dominated() {
        // x -> a -> w -> y and x -> b -> w: two routes into w.
        let (g, _) = SocialGraph::from_edges(5, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]);
        let log = ActionLog::from_tuples(
            5,
            [(0, 0), (1, 1), (2, 1), (3, 2), (4, 3)].map(|(user, time)| Tuple { user, action: 0, time }),
        );
        let inst = Instance::new(g, log, &CreditScheme::Uniform).unwrap();
        let xs = TargetSet::new(5, [0]);
        let cand = inst.default_candidates();
        let store = CreditStore::build(&inst.dags, &xs, &inst.log, UcRows::HeadsOf(&cand)).unwrap();
        let pruned = prune_dominated(&store, &cand);
        // (w,y) is not dominated by (x,a) or (a,w), but each route edge pair is
        assert!(pruned.kept.contains(&Edge::new(3, 4)));
        assert!(pruned.kept.contains(&Edge::new(0, 1)));
        assert!(pruned.dominated.contains(&(Edge::new(1, 3), Edge::new(0, 1))));
    }

    #[test]
    fn pruned_greedy_matches_plain() {
        let inst = f1();
        let opts = GreedyOptions {
            use_pruning: true,
            ..Default::default()
        };
        let sol = greedy_bil(&inst, &x(), &c(), 2, &opts).unwrap();
        assert!((sol.total_delta - 1.0).abs() < TOL);
    }

    #[test]
    fn grr_respects_per_node_bound() {
        let inst = f1();
        let sol = greedy_grr(&inst, &x(), &c(), 1).unwrap();
        assert_eq!(sol.edges, vec![XA, XB]);
        let removed: HashSet<Edge> = sol.edges.iter().copied().collect();
        assert!((delta_set(&inst, &x(), &removed).unwrap() - sol.total_delta).abs() < TOL);
    }

    #[test]
    fn on_step_sees_every_pick() {
        let inst = f1();
        let mut store = CreditStore::build(&inst.dags, &x(), &inst.log, UcRows::HeadsOf(&c())).unwrap();
        let mut seen = Vec::new();
        greedy_on_store(&mut store, &c(), 2, &GreedyOptions::default(), |s, e| {
            seen.push((e, s.sigma()));
        });
        assert_eq!(seen.len(), 2);
        assert!((seen[0].1 - 1.3).abs() < TOL);
        assert!((seen[1].1 - 1.0).abs() < TOL);
    }
}
