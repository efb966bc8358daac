//! Influence limitation under a per-node deletion bound: the multilinear
//! extension of `Δ` and continuous greedy over the partition matroid whose
//! parts are the candidate in-edges of each node.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::credit::DeltaEvaluator;
use crate::error::{Error, Result};
use crate::graph::{Edge, NodeId};

/// Largest candidate list [`multilinear_exact`] enumerates.
pub const MULTILINEAR_MAX: usize = 20;
/// Largest candidate list [`empirical_total_curvature`] enumerates.
pub const CURVATURE_MAX: usize = 15;

/// Membership probabilities `y`, aligned with `candidates`.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalSolution {
    pub candidates: Vec<Edge>,
    pub y: Vec<f64>,
    /// `Σ y_i` over the candidate in-edges of each head node.
    pub per_node_load: BTreeMap<NodeId, f64>,
}

impl FractionalSolution {
    pub fn new(candidates: Vec<Edge>, y: Vec<f64>) -> Self {
        assert_eq!(candidates.len(), y.len());
        let per_node_load = loads(&candidates, &y);
        FractionalSolution {
            candidates,
            y,
            per_node_load,
        }
    }

    pub fn max_load(&self) -> f64 {
        self.per_node_load.values().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.y.iter().sum()
    }
}

fn loads(candidates: &[Edge], y: &[f64]) -> BTreeMap<NodeId, f64> {
    let mut map = BTreeMap::new();
    for (e, &yi) in candidates.iter().zip(y) {
        *map.entry(e.dst).or_insert(0.0) += yi;
    }
    map
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CgConfig {
    pub tau: usize,
    pub samples: usize,
    pub seed: u64,
    /// Optional cap on the total number of selected edges per step, which
    /// bounds `Σ y_i`.
    pub max_edges: Option<usize>,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            tau: 100,
            samples: 20,
            seed: 0,
            max_edges: None,
        }
    }
}

/// `f(y) = E_{B∼y}[Δ(B)]` by summing over every subset with nonzero
/// probability.
pub fn multilinear_exact(eval: &DeltaEvaluator<'_>, y: &[f64]) -> Result<f64> {
    let c = eval.candidates().len();
    if c > MULTILINEAR_MAX {
        return Err(Error::GuardExceeded {
            what: "multilinear extension",
            size: c,
            limit: MULTILINEAR_MAX,
        });
    }
    fn walk(eval: &DeltaEvaluator<'_>, y: &[f64], i: usize, mask: u64, p: f64) -> f64 {
        if p == 0.0 {
            return 0.0;
        }
        if i == y.len() {
            return p * eval.delta_mask(mask);
        }
        let yi = y[i].clamp(0.0, 1.0);
        let mut total = 0.0;
        if yi > 0.0 {
            total += walk(eval, y, i + 1, mask | 1 << i, p * yi);
        }
        if yi < 1.0 {
            total += walk(eval, y, i + 1, mask, p * (1.0 - yi));
        }
        total
    }
    Ok(walk(eval, y, 0, 0, 1.0))
}

/// Draws `B ∼ y`: each candidate independently with probability `y_i`.
pub fn sample_set<R: Rng + ?Sized>(y: &[f64], rng: &mut R) -> Vec<bool> {
    y.iter().map(|&p| rng.gen::<f64>() < p).collect()
}

/// Monte Carlo estimate of `f(y)` from `s` independent samples.
pub fn multilinear_sample<R: Rng + ?Sized>(eval: &DeltaEvaluator<'_>, y: &[f64], s: usize, rng: &mut R) -> f64 {
    assert!(s >= 1, "at least one sample");
    let sets: Vec<Vec<bool>> = (0..s).map(|_| sample_set(y, rng)).collect();
    let total: f64 = sets.par_iter().map(|b| eval.delta_members(b)).sum();
    total / s as f64
}

/// Mean marginal `Δ(B_j ∪ {e_i}) − Δ(B_j)` over `s` shared samples `B_j ∼ y`,
/// clamped at zero.
pub fn cg_weights<R: Rng + ?Sized>(eval: &DeltaEvaluator<'_>, y: &[f64], s: usize, rng: &mut R) -> Vec<f64> {
    assert!(s >= 1, "at least one sample");
    let c = y.len();
    let sets: Vec<Vec<bool>> = (0..s).map(|_| sample_set(y, rng)).collect();
    let sum = sets
        .par_iter()
        .map(|b| eval.marginals(b))
        .reduce(
            || vec![0.0; c],
            |mut acc, m| {
                acc.iter_mut().zip(&m).for_each(|(a, v)| *a += v);
                acc
            },
        );
    sum.into_iter().map(|w| (w / s as f64).max(0.0)).collect()
}

/// Maximum-weight independent set of the partition matroid with at most `b`
/// edges per head node (and at most `max_edges` overall when given).
/// Candidates with zero weight or with `y_i ≥ 1` are never chosen. Returns
/// candidate indices in ascending order.
pub fn max_weight_independent(
    weights: &[f64],
    candidates: &[Edge],
    y: Option<&[f64]>,
    b: usize,
    max_edges: Option<usize>,
) -> Vec<usize> {
    select(weights, candidates, y, b, max_edges, false)
}

/// With `fill`, zero-weight candidates complete the set after all positive
/// ones, so an edge that every sample already contains still gains mass.
fn select(
    weights: &[f64],
    candidates: &[Edge],
    y: Option<&[f64]>,
    b: usize,
    max_edges: Option<usize>,
    fill: bool,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len())
        .filter(|&i| (fill || weights[i] > 0.0) && y.is_none_or(|y| y[i] < 1.0))
        .collect();
    order.sort_by(|&i, &j| {
        weights[j]
            .total_cmp(&weights[i])
            .then_with(|| candidates[i].cmp(&candidates[j]))
    });
    let cap = max_edges.unwrap_or(usize::MAX);
    let mut taken: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut chosen = Vec::new();
    for i in order {
        if chosen.len() >= cap {
            break;
        }
        let load = taken.entry(candidates[i].dst).or_insert(0);
        if *load < b {
            *load += 1;
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen
}

/// Continuous greedy: `τ` steps, each moving `1/τ` of mass onto a
/// maximum-weight independent set for the sampled marginal weights. The set
/// is completed with zero-weight candidates (lexicographic) up to the bounds.
pub fn continuous_greedy(eval: &DeltaEvaluator<'_>, b: usize, config: &CgConfig) -> Result<FractionalSolution> {
    let candidates = eval.candidates();
    if candidates.is_empty() {
        return Err(Error::invalid("candidate set is empty"));
    }
    if config.tau == 0 || config.samples == 0 {
        return Err(Error::invalid("tau and samples must be at least 1"));
    }
    if b == 0 {
        return Err(Error::invalid("per-node bound b must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let step = 1.0 / config.tau as f64;
    let mut y = vec![0.0; candidates.len()];
    for t in 0..config.tau {
        let weights = cg_weights(eval, &y, config.samples, &mut rng);
        let chosen = select(&weights, candidates, Some(&y), b, config.max_edges, true);
        log::debug!("cg step {t}: {} edges selected", chosen.len());
        for i in chosen {
            y[i] = (y[i] + step).min(1.0);
        }
    }
    Ok(FractionalSolution::new(candidates.to_vec(), y))
}

/// `c_t = 1 − min (Δ(S ∪ {e}) − Δ(S)) / Δ({e})` over `e ∉ S` with
/// `Δ({e}) > 0`; zero when no such pair exists.
pub fn empirical_total_curvature(eval: &DeltaEvaluator<'_>) -> Result<f64> {
    let c = eval.candidates().len();
    if c > CURVATURE_MAX {
        return Err(Error::GuardExceeded {
            what: "total curvature",
            size: c,
            limit: CURVATURE_MAX,
        });
    }
    let values: Vec<f64> = (0..1u64 << c).into_par_iter().map(|m| eval.delta_mask(m)).collect();
    let mut worst: Option<f64> = None;
    for i in 0..c {
        let single = values[1 << i];
        if single <= 0.0 {
            continue;
        }
        for s in 0..1u64 << c {
            if s >> i & 1 == 1 {
                continue;
            }
            let ratio = (values[(s | 1 << i) as usize] - values[s as usize]) / single;
            worst = Some(worst.map_or(ratio, |w: f64| w.min(ratio)));
        }
    }
    Ok(worst.map_or(0.0, |w| (1.0 - w).clamp(0.0, 1.0)))
}
