//! Turning a fractional solution into a feasible edge set.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::credit::DeltaEvaluator;
use crate::error::{Error, Result};
use crate::graph::{Edge, NodeId};

/// Default number of randomized rounding trials.
pub const DEFAULT_TRIALS: usize = 50;

const RESIDUAL_EPS: f64 = 1e-12;

/// Whether no node has more than `b` incoming edges in `edges`.
pub fn feasible(edges: &[Edge], b: usize) -> bool {
    max_in_load(edges) <= b
}

/// Largest number of edges of `edges` sharing a head node.
pub fn max_in_load(edges: &[Edge]) -> usize {
    let mut loads: HashMap<NodeId, usize> = HashMap::new();
    for e in edges {
        *loads.entry(e.dst).or_default() += 1;
    }
    loads.into_values().max().unwrap_or(0)
}

/// One randomized rounding trial.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub edges: Vec<Edge>,
    pub delta: f64,
    pub max_load: usize,
}

/// Best trial plus the record of all trials.
#[derive(Clone, Debug, PartialEq)]
pub struct Rounded {
    pub edges: Vec<Edge>,
    pub delta: f64,
    pub trials: Vec<Trial>,
}

/// Private stream for trial `index`; independent of the trial count, so a
/// run with more trials extends a run with fewer.
fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Scan-with-guard rounding: candidates in descending `y` (ties by edge),
/// each included with probability `y_i` unless that would push its head
/// past `b` in-edges or the set past `max_edges`. Keeps the trial with the
/// largest `Δ`, earliest on ties.
pub fn randomized_round(
    eval: &DeltaEvaluator<'_>,
    y: &[f64],
    b: usize,
    trials: usize,
    seed: u64,
    max_edges: Option<usize>,
) -> Result<Rounded> {
    let candidates = eval.candidates();
    if y.len() != candidates.len() {
        return Err(Error::invalid("y and candidate list differ in length"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&i, &j| y[j].total_cmp(&y[i]).then_with(|| candidates[i].cmp(&candidates[j])));
    let cap = max_edges.unwrap_or(usize::MAX);
    let run = |index: usize| {
        let mut rng = trial_rng(seed, index);
        let mut loads: HashMap<NodeId, usize> = HashMap::new();
        let mut members = vec![false; y.len()];
        let mut count = 0;
        for &i in &order {
            // one draw per candidate keeps the stream aligned across inputs
            let coin = rng.gen::<f64>();
            if coin >= y[i] || count >= cap {
                continue;
            }
            let load = loads.entry(candidates[i].dst).or_default();
            if *load < b {
                *load += 1;
                members[i] = true;
                count += 1;
            }
        }
        let edges: Vec<Edge> = (0..y.len()).filter(|&i| members[i]).map(|i| candidates[i]).collect();
        Trial {
            index,
            delta: eval.delta_members(&members),
            max_load: loads.into_values().max().unwrap_or(0),
            edges,
        }
    };
    let records: Vec<Trial> = (0..trials).into_par_iter().map(run).collect();
    let best = records
        .iter()
        .fold(&records[0], |best, t| if t.delta > best.delta { t } else { best });
    Ok(Rounded {
        edges: best.edges.clone(),
        delta: best.delta,
        trials: records,
    })
}

/// `y` as a convex combination `Σ λ_t·1_{I_t}` of independent sets of the
/// partition matroid (at most `b` edges per head node). The empty set takes
/// any leftover mass.
pub fn decompose(candidates: &[Edge], y: &[f64], b: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    check_fractional(candidates, y, b)?;
    let mut groups: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, e) in candidates.iter().enumerate() {
        groups.entry(e.dst).or_default().push(i);
    }
    let mut residual: Vec<f64> = y.iter().map(|&v| if v <= RESIDUAL_EPS { 0.0 } else { v }).collect();
    let mut mass = 1.0;
    let mut parts = Vec::new();
    let limit = 4 * candidates.len() + 8;
    while mass > RESIDUAL_EPS {
        if parts.len() > limit {
            return Err(Error::Decomposition(format!("no convergence after {limit} sets")));
        }
        let mut chosen = Vec::new();
        let mut left_out: f64 = 0.0;
        for members in groups.values() {
            let mut live: Vec<usize> = members.iter().copied().filter(|&i| residual[i] > 0.0).collect();
            live.sort_by(|&i, &j| residual[j].total_cmp(&residual[i]).then_with(|| candidates[i].cmp(&candidates[j])));
            for (rank, &i) in live.iter().enumerate() {
                if rank < b {
                    chosen.push(i);
                } else {
                    left_out = left_out.max(residual[i]);
                }
            }
        }
        let smallest = chosen.iter().map(|&i| residual[i]).fold(mass, f64::min);
        let mut lambda = smallest.min(mass - left_out);
        if lambda < 1e-9 && left_out <= mass + 1e-9 {
            // a left-out residual sits at the remaining mass up to rounding
            lambda = smallest;
        }
        if lambda <= 0.0 {
            return Err(Error::Decomposition(format!(
                "residual {left_out} exceeds the remaining mass {mass}"
            )));
        }
        for &i in &chosen {
            residual[i] -= lambda;
            if residual[i] <= RESIDUAL_EPS {
                residual[i] = 0.0;
            }
        }
        mass -= lambda;
        chosen.sort_unstable();
        parts.push((chosen, lambda));
    }
    if let Some(i) = residual.iter().position(|&r| r > 1e-6) {
        return Err(Error::Decomposition(format!(
            "mass exhausted with residual {} on {}",
            residual[i], candidates[i]
        )));
    }
    Ok(parts)
}

fn check_fractional(candidates: &[Edge], y: &[f64], b: usize) -> Result<()> {
    if y.len() != candidates.len() {
        return Err(Error::Decomposition("y and candidate list differ in length".into()));
    }
    if let Some(i) = y.iter().position(|v| !(-1e-12..=1.0 + 1e-12).contains(v)) {
        return Err(Error::Decomposition(format!("y = {} on {} is outside [0, 1]", y[i], candidates[i])));
    }
    let mut loads: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (e, &v) in candidates.iter().zip(y) {
        *loads.entry(e.dst).or_insert(0.0) += v;
    }
    if let Some((v, load)) = loads.into_iter().find(|&(_, l)| l > b as f64 + 1e-9) {
        return Err(Error::Decomposition(format!("load {load} on node {v} exceeds b = {b}")));
    }
    Ok(())
}

/// Swap rounding for the partition matroid. Decomposes `y`, then merges the
/// sets pairwise: within each head group, differing elements are exchanged,
/// keeping the first set's element with probability `λ_1 / (λ_1 + λ_2)`.
/// Each edge ends up selected with probability `y_i`. Returns candidate
/// indices in ascending order.
pub fn swap_round<R: Rng + ?Sized>(candidates: &[Edge], y: &[f64], b: usize, rng: &mut R) -> Result<Vec<usize>> {
    let parts = decompose(candidates, y, b)?;
    let mut iter = parts.into_iter();
    let Some((first, mut weight)) = iter.next() else {
        return Ok(Vec::new());
    };
    let mut current = group_by_head(candidates, &first);
    for (next, lambda) in iter {
        let other = group_by_head(candidates, &next);
        let keep = weight / (weight + lambda);
        let mut heads: Vec<NodeId> = current.keys().chain(other.keys()).copied().collect();
        heads.sort_unstable();
        heads.dedup();
        for head in heads {
            let mine = current.entry(head).or_default();
            let theirs = other.get(&head).map_or(&[][..], Vec::as_slice);
            merge_group(mine, theirs, keep, rng);
        }
        weight += lambda;
    }
    let mut out: Vec<usize> = current.into_values().flatten().collect();
    out.sort_unstable();
    Ok(out)
}

fn group_by_head(candidates: &[Edge], set: &[usize]) -> BTreeMap<NodeId, Vec<usize>> {
    let mut map: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for &i in set {
        map.entry(candidates[i].dst).or_default().push(i);
    }
    map
}

/// Pads both sides with dummy slots to equal size, then resolves each pair of
/// differing slots with one coin.
fn merge_group<R: Rng + ?Sized>(mine: &mut Vec<usize>, theirs: &[usize], keep: f64, rng: &mut R) {
    let only_mine: Vec<Option<usize>> = mine.iter().filter(|i| !theirs.contains(i)).map(|&i| Some(i)).collect();
    let only_theirs: Vec<Option<usize>> = theirs.iter().filter(|i| !mine.contains(i)).map(|&i| Some(i)).collect();
    let width = only_mine.len().max(only_theirs.len());
    let pad = |v: Vec<Option<usize>>| {
        let mut v = v;
        v.resize(width, None);
        v
    };
    let (only_mine, only_theirs) = (pad(only_mine), pad(only_theirs));
    let mut merged: Vec<usize> = mine.iter().copied().filter(|i| theirs.contains(i)).collect();
    for (a, b) in only_mine.into_iter().zip(only_theirs) {
        let pick = if rng.gen::<f64>() < keep { a } else { b };
        merged.extend(pick);
    }
    merged.sort_unstable();
    *mine = merged;
}

/// Unguarded rounding: every candidate independently with probability `y_i`.
pub fn independent_round<R: Rng + ?Sized>(y: &[f64], rng: &mut R) -> Vec<usize> {
    (0..y.len()).filter(|&i| rng.gen::<f64>() < y[i]).collect()
}

/// `ε = sqrt(6·ln n / b)`.
pub fn chernoff_epsilon(n: usize, b: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("node count must be at least 2"));
    }
    if b == 0 {
        return Err(Error::invalid("per-node bound b must be at least 1"));
    }
    Ok((6.0 * (n as f64).ln() / b as f64).sqrt())
}
