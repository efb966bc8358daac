//! Credit Distribution Model.
//!
//! For a target set `X` and action `a`, the set credit of `u` is
//! `Γ_{X,u}(a) = 1` for `u ∈ X` and `Σ_{w ∈ N_in(u,a)} Γ_{X,w}(a)·γ_{(w,u)}(a)`
//! otherwise. The influence of `X` is
//! `σ_cd = Σ_u (1/|A_u|) Σ_{a ∈ A_u} Γ_{X,u}(a)`.
//!
//! Because the recursion stops at members of `X`, an edge entering a target
//! node carries no set credit and deleting it never changes `σ_cd`. The
//! [`CreditStore`] therefore treats such edges as absent (`EP = 0`), and its
//! pairwise credits `UC[z][w]` are path sums over the DAG with those edges
//! cut. With that convention the single-edge change
//! `SC[u]·γ_{(u,v)}·Σ_w UC[v][w]/|A_w|` equals the from-scratch difference
//! exactly, and edge removals update both tables in closed form.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::actions::{ActionId, ActionLog};
use crate::dag::{ActionDag, CreditScheme, CreditTable, LocalId};
use crate::error::{Error, Result};
use crate::graph::{Edge, NodeId, SocialGraph};
use crate::problem::{Instance, TargetSet};
use crate::textio;

/// Credits at or below this value are dropped from the sparse tables.
pub const PRUNE_EPS: f64 = 1e-12;

/// Largest DAG the path-enumeration oracles accept.
pub const ORACLE_MAX_NODES: usize = 20;

/// Which rows `UC[z][·]` are materialised when a store is built. Rows that are
/// not materialised are computed on demand from the current edge credits.
#[derive(Clone, Copy, Debug)]
pub enum UcRows<'c> {
    /// Every node of every DAG.
    All,
    /// Heads of the given edges, the only rows read when those edges are
    /// evaluated or removed.
    HeadsOf(&'c [Edge]),
}

/// Sparse row `UC[z][·]` sorted by local id, with its count-weighted sum
/// `Σ_w UC[z][w] / |A_w|` cached.
#[derive(Clone, Debug, Default)]
pub(crate) struct UcRow {
    pub(crate) entries: Vec<(LocalId, f64)>,
    pub(crate) weighted: f64,
}

impl UcRow {
    fn get(&self, w: LocalId) -> Option<f64> {
        self.entries
            .binary_search_by_key(&w, |&(k, _)| k)
            .ok()
            .map(|i| self.entries[i].1)
    }
}

#[derive(Clone, Debug)]
struct ActionCredits {
    /// `EP`: current direct credit per DAG edge; zero once removed or cut.
    ep: Vec<f64>,
    /// `SC`: set credit per local node.
    sc: Vec<f64>,
    /// `UC`: materialised rows, indexed by local source.
    uc: Vec<Option<UcRow>>,
}

/// The `EP`/`UC`/`SC` tables for all actions, plus `|A_u|`.
#[derive(Clone, Debug)]
pub struct CreditStore<'d> {
    dags: &'d [ActionDag],
    targets: TargetSet,
    inv_count: Vec<f64>,
    counts: Vec<u32>,
    actions: Vec<ActionCredits>,
    /// Live occurrences of each edge: `(action index, DAG edge index)`.
    occurrences: HashMap<Edge, Vec<(u32, u32)>>,
}

impl<'d> CreditStore<'d> {
    /// Builds the tables by forward dynamic programming in topological order.
    pub fn build(
        dags: &'d [ActionDag],
        targets: &TargetSet,
        log: &ActionLog,
        rows: UcRows<'_>,
    ) -> Result<Self> {
        Self::build_without(dags, targets, log, rows, &HashSet::new())
    }

    /// Same as [`Self::build`] on the graph with `removed` deleted.
    pub fn build_without(
        dags: &'d [ActionDag],
        targets: &TargetSet,
        log: &ActionLog,
        rows: UcRows<'_>,
        removed: &HashSet<Edge>,
    ) -> Result<Self> {
        Self::build_with_counts(dags, targets, log.counts(), rows, removed)
    }

    pub(crate) fn build_with_counts(
        dags: &'d [ActionDag],
        targets: &TargetSet,
        counts: &[u32],
        rows: UcRows<'_>,
        removed: &HashSet<Edge>,
    ) -> Result<Self> {
        if let Some(dag) = dags.iter().find(|d| !d.is_credited()) {
            return Err(Error::Uncredited(dag.action()));
        }
        let inv_count = inverse_counts(counts);
        let heads: Option<HashSet<NodeId>> = match rows {
            UcRows::All => None,
            UcRows::HeadsOf(edges) => Some(edges.iter().map(|e| e.dst).collect()),
        };
        let build_one = |dag: &ActionDag| {
            let ep = live_credits(dag, targets, removed);
            let sc = set_credits_with(dag, targets, &ep);
            let mut uc: Vec<Option<UcRow>> = vec![None; dag.node_count()];
            let mut buf = vec![0.0; dag.node_count()];
            for (z, slot) in uc.iter_mut().enumerate() {
                let wanted = heads
                    .as_ref()
                    .is_none_or(|h| h.contains(&dag.node(z as LocalId)));
                if wanted {
                    *slot = Some(row_from(dag, &ep, z as LocalId, &inv_count, &mut buf));
                }
            }
            ActionCredits { ep, sc, uc }
        };
        let actions: Vec<ActionCredits> = dags.par_iter().map(build_one).collect();
        let mut occurrences: HashMap<Edge, Vec<(u32, u32)>> = HashMap::new();
        for (a, (dag, credits)) in dags.iter().zip(&actions).enumerate() {
            for (k, e) in dag.edges().iter().enumerate() {
                if credits.ep[k] > 0.0 {
                    occurrences
                        .entry(dag.global_edge(e))
                        .or_default()
                        .push((a as u32, k as u32));
                }
            }
        }
        Ok(CreditStore {
            dags,
            targets: targets.clone(),
            inv_count,
            counts: counts.to_vec(),
            actions,
            occurrences,
        })
    }

    pub fn dags(&self) -> &'d [ActionDag] {
        self.dags
    }

    pub fn targets(&self) -> &TargetSet {
        &self.targets
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    /// `1 / |A_u|`, or zero for users without actions.
    pub fn inv_count(&self, u: NodeId) -> f64 {
        self.inv_count.get(u as usize).copied().unwrap_or(0.0)
    }

    /// `SC[u][a]` for the action at index `a`; zero when absent.
    pub fn sc(&self, u: NodeId, a: usize) -> f64 {
        self.dags[a]
            .local(u)
            .map_or(0.0, |i| self.actions[a].sc[i as usize])
    }

    /// `EP[u][v][a]`; zero when the edge is absent, removed or enters `X`.
    pub fn ep(&self, e: Edge, a: usize) -> f64 {
        self.dags[a]
            .find_edge(e)
            .map_or(0.0, |k| self.actions[a].ep[k])
    }

    /// `UC[z][w][a]`, computing the row if it is not materialised.
    pub fn uc(&self, z: NodeId, w: NodeId, a: usize) -> f64 {
        let dag = &self.dags[a];
        let (Some(zl), Some(wl)) = (dag.local(z), dag.local(w)) else {
            return 0.0;
        };
        match &self.actions[a].uc[zl as usize] {
            Some(row) => row.get(wl).unwrap_or(0.0),
            None => self.fresh_row(a, zl).get(wl).unwrap_or(0.0),
        }
    }

    /// Whether `UC[z][·][a]` is materialised.
    pub fn has_row(&self, z: NodeId, a: usize) -> bool {
        self.dags[a]
            .local(z)
            .is_some_and(|zl| self.actions[a].uc[zl as usize].is_some())
    }

    fn fresh_row(&self, a: usize, z: LocalId) -> UcRow {
        let dag = &self.dags[a];
        let mut buf = vec![0.0; dag.node_count()];
        row_from(dag, &self.actions[a].ep, z, &self.inv_count, &mut buf)
    }

    /// `Σ_w UC[v][w][a] / |A_w|` from the cached row sum.
    pub(crate) fn row_weight(&self, a: usize, v: LocalId) -> f64 {
        match &self.actions[a].uc[v as usize] {
            Some(row) => row.weighted,
            None => self.fresh_row(a, v).weighted,
        }
    }

    /// Live occurrences of `e`: `(action index, DAG edge index)`.
    pub(crate) fn occurrences(&self, e: Edge) -> &[(u32, u32)] {
        self.occurrences.get(&e).map_or(&[], Vec::as_slice)
    }

    pub(crate) fn edge_credit(&self, a: usize, k: usize) -> f64 {
        self.actions[a].ep[k]
    }

    pub(crate) fn local_sc(&self, a: usize, u: LocalId) -> f64 {
        self.actions[a].sc[u as usize]
    }

    /// `κ_{X,u}`: set credit of `u` averaged over the actions `u` performed.
    pub fn kappa(&self, u: NodeId) -> Result<f64> {
        let count = self.counts.get(u as usize).copied().unwrap_or(0);
        if count == 0 {
            return Err(Error::NoActions(u as u64));
        }
        let total: f64 = (0..self.actions.len()).map(|a| self.sc(u, a)).sum();
        Ok(total / count as f64)
    }

    /// `σ_cd(G, X)`; users without actions contribute nothing.
    pub fn sigma(&self) -> f64 {
        self.actions
            .iter()
            .zip(self.dags)
            .map(|(credits, dag)| action_sigma(dag, &credits.sc, &self.inv_count))
            .sum()
    }

    /// `Δ({e})` from the current tables:
    /// `Σ_a SC[u][a]·EP[u][v][a]·Σ_w UC[v][w][a]/|A_w|`. Leaves the store unchanged.
    pub fn delta_single(&self, e: Edge) -> f64 {
        self.edge_terms(e).iter().map(|t| t.value).sum()
    }

    /// Per-`(action, w)` terms of [`Self::delta_single`]:
    /// `SC[u][a]·EP[u][v][a]·UC[v][w][a]/|A_w|`.
    pub fn edge_terms(&self, e: Edge) -> Vec<EdgeTerm> {
        let mut terms = Vec::new();
        for &(a, k) in self.occurrences(e) {
            let (a, k) = (a as usize, k as usize);
            let dag = &self.dags[a];
            let edge = dag.edges()[k];
            let lead = self.actions[a].sc[edge.tail as usize] * self.actions[a].ep[k];
            if lead <= 0.0 {
                continue;
            }
            let owned;
            let row = match &self.actions[a].uc[edge.head as usize] {
                Some(row) => row,
                None => {
                    owned = self.fresh_row(a, edge.head);
                    &owned
                }
            };
            for &(w, credit) in &row.entries {
                let node = dag.node(w);
                terms.push(EdgeTerm {
                    action: dag.action(),
                    node,
                    value: lead * credit * self.inv_count[node as usize],
                });
            }
        }
        terms
    }

    /// Applies the removal of `e` to `UC`: for every materialised row `z`
    /// reaching `u`, `UC[z][w] -= UC[z][u]·γ·UC[v][w]`. Reads pre-removal
    /// rows and leaves `EP` in place, so it must be followed by
    /// [`Self::update_sc`].
    pub fn update_uc(&mut self, e: Edge) {
        let occ = self.occurrences(e).to_vec();
        for (a, k) in occ {
            let (a, k) = (a as usize, k as usize);
            let gamma = self.actions[a].ep[k];
            if gamma <= 0.0 {
                continue;
            }
            let edge = self.dags[a].edges()[k];
            let head_row = self.row_snapshot(a, edge.head);
            let dag = &self.dags[a];
            let inv_count = &self.inv_count;
            for row in self.actions[a].uc.iter_mut().flatten() {
                let Some(zu) = row.get(edge.tail) else {
                    continue;
                };
                subtract_scaled(row, zu * gamma, &head_row.entries, dag, inv_count);
            }
        }
    }

    /// Applies the removal of `e` to `SC`:
    /// `SC[w] -= SC[u]·γ·UC[v][w]`, then clears `EP[u][v]`.
    pub fn update_sc(&mut self, e: Edge) {
        let Some(occ) = self.occurrences.remove(&e) else {
            return;
        };
        for (a, k) in occ {
            let (a, k) = (a as usize, k as usize);
            let gamma = self.actions[a].ep[k];
            let edge = self.dags[a].edges()[k];
            let lead = self.actions[a].sc[edge.tail as usize] * gamma;
            if lead > 0.0 {
                let head_row = self.row_snapshot(a, edge.head);
                let sc = &mut self.actions[a].sc;
                for &(w, credit) in &head_row.entries {
                    let slot = &mut sc[w as usize];
                    *slot -= lead * credit;
                    if *slot <= PRUNE_EPS {
                        *slot = 0.0;
                    }
                }
            }
            self.actions[a].ep[k] = 0.0;
        }
    }

    /// Removes `e` from the graph: [`Self::update_uc`] then [`Self::update_sc`].
    /// A second removal of the same edge is a no-op.
    pub fn remove_edge(&mut self, e: Edge) {
        self.update_uc(e);
        self.update_sc(e);
    }

    fn row_snapshot(&self, a: usize, v: LocalId) -> UcRow {
        match &self.actions[a].uc[v as usize] {
            Some(row) => row.clone(),
            None => self.fresh_row(a, v),
        }
    }

    /// Largest absolute difference between this store and `other` over all
    /// `EP` and `SC` entries and all rows materialised in `self`.
    pub fn max_deviation(&self, other: &CreditStore<'_>) -> f64 {
        assert_eq!(self.actions.len(), other.actions.len());
        let mut worst: f64 = 0.0;
        for (a, (mine, theirs)) in self.actions.iter().zip(&other.actions).enumerate() {
            for (x, y) in mine.ep.iter().zip(&theirs.ep) {
                worst = worst.max((x - y).abs());
            }
            for (x, y) in mine.sc.iter().zip(&theirs.sc) {
                worst = worst.max((x - y).abs());
            }
            for (z, row) in mine.uc.iter().enumerate() {
                let Some(row) = row else { continue };
                let other_row = other.row_snapshot(a, z as LocalId);
                let n = self.dags[a].node_count();
                let mut dense = vec![0.0; n];
                for &(w, c) in &row.entries {
                    dense[w as usize] += c;
                }
                for &(w, c) in &other_row.entries {
                    dense[w as usize] -= c;
                }
                for d in dense {
                    worst = worst.max(d.abs());
                }
                worst = worst.max((row.weighted - other_row.weighted).abs());
            }
        }
        worst
    }

    /// Writes `u v action value` lines for every materialised `UC` entry.
    pub fn dump_uc(&self, path: impl AsRef<Path>, graph: &SocialGraph) -> Result<()> {
        let path = path.as_ref();
        let mut out = textio::create(path)?;
        for (credits, dag) in self.actions.iter().zip(self.dags) {
            for (z, row) in credits.uc.iter().enumerate() {
                let Some(row) = row else { continue };
                for &(w, c) in &row.entries {
                    writeln!(
                        out,
                        "{} {} {} {}",
                        graph.external_id(dag.node(z as LocalId)),
                        graph.external_id(dag.node(w)),
                        dag.action(),
                        c
                    )
                    .map_err(|e| Error::io(path, e))?;
                }
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes `u action value` lines for every nonzero `SC` entry.
    pub fn dump_sc(&self, path: impl AsRef<Path>, graph: &SocialGraph) -> Result<()> {
        let path = path.as_ref();
        let mut out = textio::create(path)?;
        for (credits, dag) in self.actions.iter().zip(self.dags) {
            for (i, &c) in credits.sc.iter().enumerate() {
                if c > 0.0 {
                    writeln!(
                        out,
                        "{} {} {}",
                        graph.external_id(dag.node(i as LocalId)),
                        dag.action(),
                        c
                    )
                    .map_err(|e| Error::io(path, e))?;
                }
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// One summand of the single-edge change: the credit `X` loses on `node`
/// in `action`, already divided by `|A_node|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeTerm {
    pub action: ActionId,
    pub node: NodeId,
    pub value: f64,
}

fn inverse_counts(counts: &[u32]) -> Vec<f64> {
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { 1.0 / c as f64 })
        .collect()
}

/// Direct credits with edges into `X` and edges in `removed` set to zero.
fn live_credits(dag: &ActionDag, targets: &TargetSet, removed: &HashSet<Edge>) -> Vec<f64> {
    dag.edges()
        .iter()
        .map(|e| {
            let edge = dag.global_edge(e);
            if targets.contains(edge.dst) || removed.contains(&edge) {
                0.0
            } else {
                e.gamma
            }
        })
        .collect()
}

fn set_credits_with(dag: &ActionDag, targets: &TargetSet, ep: &[f64]) -> Vec<f64> {
    let n = dag.node_count();
    let mut sc = vec![0.0; n];
    for i in 0..n {
        let local = i as LocalId;
        sc[i] = if targets.contains(dag.node(local)) {
            1.0
        } else {
            dag.in_edges(local)
                .iter()
                .map(|&k| {
                    let k = k as usize;
                    sc[dag.edges()[k].tail as usize] * ep[k]
                })
                .sum()
        };
    }
    sc
}

fn row_from(dag: &ActionDag, ep: &[f64], z: LocalId, inv_count: &[f64], buf: &mut [f64]) -> UcRow {
    let n = dag.node_count();
    let start = z as usize;
    buf[start] = 1.0;
    for i in start + 1..n {
        buf[i] = dag
            .in_edges(i as LocalId)
            .iter()
            .map(|&k| {
                let k = k as usize;
                let tail = dag.edges()[k].tail as usize;
                if tail < start {
                    0.0
                } else {
                    buf[tail] * ep[k]
                }
            })
            .sum();
    }
    let mut row = UcRow::default();
    for (i, slot) in buf.iter_mut().enumerate().take(n).skip(start) {
        if *slot > 0.0 {
            row.entries.push((i as LocalId, *slot));
            row.weighted += *slot * inv_count[dag.node(i as LocalId) as usize];
        }
        *slot = 0.0;
    }
    row
}

/// `row -= scale · other`, where `other`'s support is contained in `row`'s.
fn subtract_scaled(
    row: &mut UcRow,
    scale: f64,
    other: &[(LocalId, f64)],
    dag: &ActionDag,
    inv_count: &[f64],
) {
    if scale <= 0.0 || other.is_empty() {
        return;
    }
    let mut j = 0;
    for &(w, c) in other {
        while j < row.entries.len() && row.entries[j].0 < w {
            j += 1;
        }
        if j < row.entries.len() && row.entries[j].0 == w {
            row.entries[j].1 -= scale * c;
        }
    }
    row.entries.retain(|&(_, c)| c > PRUNE_EPS);
    row.weighted = row
        .entries
        .iter()
        .map(|&(w, c)| c * inv_count[dag.node(w) as usize])
        .sum();
}

fn action_sigma(dag: &ActionDag, sc: &[f64], inv_count: &[f64]) -> f64 {
    sc.iter()
        .enumerate()
        .map(|(i, &c)| c * inv_count[dag.node(i as LocalId) as usize])
        .sum()
}

/// Set credits `Γ_{X,u}(a)` of every node of `dag` (local order) with
/// `removed` deleted, by the plain recursion.
pub fn set_credits(dag: &ActionDag, targets: &TargetSet, removed: &HashSet<Edge>) -> Vec<f64> {
    let ep: Vec<f64> = dag
        .edges()
        .iter()
        .map(|e| {
            if removed.contains(&dag.global_edge(e)) {
                0.0
            } else {
                e.gamma
            }
        })
        .collect();
    set_credits_with(dag, targets, &ep)
}

/// `σ_cd` evaluated directly from credited DAGs, without a store.
pub fn sigma_from_dags(dags: &[ActionDag], targets: &TargetSet, log: &ActionLog) -> f64 {
    let inv = inverse_counts(log.counts());
    let none = HashSet::new();
    dags.iter()
        .map(|dag| action_sigma(dag, &set_credits(dag, targets, &none), &inv))
        .sum()
}

/// Reference `Δ(B) = σ_cd(G, X) − σ_cd(G ∖ B, X)`.
///
/// The modified graph is rebuilt from scratch and its DAGs are re-derived
/// from the log; direct credits are frozen at their values on the original
/// graph, so deletion never redistributes credit onto surviving edges.
pub fn delta_set(instance: &Instance, targets: &TargetSet, removed: &HashSet<Edge>) -> Result<f64> {
    if removed.is_empty() {
        return Ok(0.0);
    }
    let before = sigma_from_dags(&instance.dags, targets, &instance.log);
    let modified = instance.graph.without_edges(removed);
    let frozen = CreditScheme::Explicit(CreditTable::from_dags(&instance.dags));
    let rebuilt = Instance::new(modified, instance.log.clone(), &frozen)?;
    let after = sigma_from_dags(&rebuilt.dags, targets, &rebuilt.log);
    Ok(before - after)
}

fn guard(dag: &ActionDag) -> Result<()> {
    if dag.node_count() > ORACLE_MAX_NODES {
        return Err(Error::GuardExceeded {
            what: "path enumeration",
            size: dag.node_count(),
            limit: ORACLE_MAX_NODES,
        });
    }
    Ok(())
}

/// `Γ_{X,u}(a)` by enumerating every path that ends at `u`, starts in `X`
/// and visits no other member of `X`.
pub fn oracle_set_credit(dag: &ActionDag, targets: &TargetSet, u: NodeId) -> Result<f64> {
    guard(dag)?;
    if targets.contains(u) {
        return Ok(1.0);
    }
    let Some(start) = dag.local(u) else {
        return Ok(0.0);
    };
    fn walk(dag: &ActionDag, targets: &TargetSet, at: LocalId, product: f64, total: &mut f64) {
        for &k in dag.in_edges(at) {
            let e = dag.edges()[k as usize];
            let p = product * e.gamma;
            if targets.contains(dag.node(e.tail)) {
                *total += p;
            } else {
                walk(dag, targets, e.tail, p, total);
            }
        }
    }
    let mut total = 0.0;
    walk(dag, targets, start, 1.0, &mut total);
    Ok(total)
}

/// `UC[z][w](a)` by enumerating paths `z → w` whose nodes after `z` avoid `X`.
pub fn oracle_pair_credit(dag: &ActionDag, targets: &TargetSet, z: NodeId, w: NodeId) -> Result<f64> {
    guard(dag)?;
    let (Some(from), Some(to)) = (dag.local(z), dag.local(w)) else {
        return Ok(0.0);
    };
    fn walk(dag: &ActionDag, targets: &TargetSet, at: LocalId, to: LocalId, product: f64, total: &mut f64) {
        if at == to {
            *total += product;
            return;
        }
        for &k in dag.out_edges(at) {
            let e = dag.edges()[k as usize];
            if targets.contains(dag.node(e.head)) {
                continue;
            }
            walk(dag, targets, e.head, to, product * e.gamma, total);
        }
    }
    let mut total = 0.0;
    walk(dag, targets, from, to, 1.0, &mut total);
    Ok(total)
}

/// Fast `Δ(B)` for subsets `B` of a fixed candidate list: only the actions
/// touched by `B` are recomputed, against cached per-action influence.
#[derive(Clone, Debug)]
pub struct DeltaEvaluator<'d> {
    dags: &'d [ActionDag],
    targets: TargetSet,
    inv_count: Vec<f64>,
    candidates: Vec<Edge>,
    index: HashMap<Edge, usize>,
    /// Per candidate, the `(action, edge index)` pairs where it occurs.
    touches: Vec<Vec<(u32, u32)>>,
    /// Per action, the candidate index of each DAG edge.
    edge_candidate: Vec<Vec<Option<u32>>>,
    /// Actions with at least one target member; the others carry no credit.
    relevant: Vec<usize>,
    base: Vec<f64>,
}

impl<'d> DeltaEvaluator<'d> {
    pub fn new(dags: &'d [ActionDag], targets: &TargetSet, log: &ActionLog, candidates: &[Edge]) -> Self {
        let inv_count = inverse_counts(log.counts());
        let index: HashMap<Edge, usize> = candidates.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let mut touches = vec![Vec::new(); candidates.len()];
        let mut edge_candidate = Vec::with_capacity(dags.len());
        for (a, dag) in dags.iter().enumerate() {
            let mut row = vec![None; dag.edge_count()];
            for (k, e) in dag.edges().iter().enumerate() {
                if let Some(&i) = index.get(&dag.global_edge(e)) {
                    touches[i].push((a as u32, k as u32));
                    row[k] = Some(i as u32);
                }
            }
            edge_candidate.push(row);
        }
        let relevant = (0..dags.len())
            .filter(|&a| dags[a].nodes().iter().any(|&u| targets.contains(u)))
            .collect();
        let none = HashSet::new();
        let base = dags
            .iter()
            .map(|dag| action_sigma(dag, &set_credits(dag, targets, &none), &inv_count))
            .collect();
        DeltaEvaluator {
            dags,
            targets: targets.clone(),
            inv_count,
            candidates: candidates.to_vec(),
            index,
            touches,
            edge_candidate,
            relevant,
            base,
        }
    }

    pub fn dags(&self) -> &'d [ActionDag] {
        self.dags
    }

    pub fn targets(&self) -> &TargetSet {
        &self.targets
    }

    /// Index of `e` in the candidate list.
    pub fn position(&self, e: Edge) -> Option<usize> {
        self.index.get(&e).copied()
    }

    /// Marginal `Δ(B ∪ {e_i}) − Δ(B)` of every candidate, where `B` is given
    /// by `members`; zero for members of `B`.
    ///
    /// Per action this is `SC[u]·γ·R[v]` on `G ∖ B`, where the backward sum
    /// `R[v] = Σ_w UC[v][w]/|A_w|` satisfies
    /// `R[v] = 1/|A_v| + Σ_{(v,z)} γ_{(v,z)}·R[z]`.
    pub fn marginals(&self, members: &[bool]) -> Vec<f64> {
        let mut out = vec![0.0; self.candidates.len()];
        let mut r = Vec::new();
        for &a in &self.relevant {
            let dag = &self.dags[a];
            let cands = &self.edge_candidate[a];
            let ep: Vec<f64> = dag
                .edges()
                .iter()
                .zip(cands)
                .map(|(e, c)| {
                    let gone = c.is_some_and(|i| members[i as usize]);
                    if gone || self.targets.contains(dag.node(e.head)) {
                        0.0
                    } else {
                        e.gamma
                    }
                })
                .collect();
            let sc = set_credits_with(dag, &self.targets, &ep);
            r.clear();
            r.resize(dag.node_count(), 0.0);
            for i in (0..dag.node_count()).rev() {
                let local = i as LocalId;
                let mut acc = self.inv_count[dag.node(local) as usize];
                for &k in dag.out_edges(local) {
                    let k = k as usize;
                    acc += ep[k] * r[dag.edges()[k].head as usize];
                }
                r[i] = acc;
            }
            for (k, e) in dag.edges().iter().enumerate() {
                if let Some(i) = cands[k] {
                    if ep[k] > 0.0 {
                        out[i as usize] += sc[e.tail as usize] * ep[k] * r[e.head as usize];
                    }
                }
            }
        }
        out
    }

    pub fn candidates(&self) -> &[Edge] {
        &self.candidates
    }

    pub fn sigma(&self) -> f64 {
        self.base.iter().sum()
    }

    /// `Δ` of the candidates whose indices are yielded by `chosen`.
    pub fn delta<I: IntoIterator<Item = usize>>(&self, chosen: I) -> f64 {
        let mut masked: HashMap<u32, Vec<u32>> = HashMap::new();
        for i in chosen {
            for &(a, k) in &self.touches[i] {
                masked.entry(a).or_default().push(k);
            }
        }
        let mut actions: Vec<(u32, Vec<u32>)> = masked.into_iter().collect();
        actions.sort_unstable_by_key(|(a, _)| *a);
        actions
            .into_iter()
            .map(|(a, ks)| {
                let dag = &self.dags[a as usize];
                let mut ep: Vec<f64> = dag.edges().iter().map(|e| e.gamma).collect();
                for k in ks {
                    ep[k as usize] = 0.0;
                }
                let sc = set_credits_with(dag, &self.targets, &ep);
                self.base[a as usize] - action_sigma(dag, &sc, &self.inv_count)
            })
            .sum()
    }

    /// `Δ` of the subset encoded by the low bits of `mask`.
    pub fn delta_mask(&self, mask: u64) -> f64 {
        self.delta((0..self.candidates.len()).filter(|&i| mask >> i & 1 == 1))
    }

    /// `Δ` of a boolean membership vector over the candidates.
    pub fn delta_members(&self, members: &[bool]) -> f64 {
        self.delta(members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i))
    }
}
