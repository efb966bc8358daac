//! Per-action propagation DAGs and direct-credit assignment.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::actions::{ActionId, ActionLog, Timestamp};
use crate::error::{Error, Result};
use crate::graph::{Edge, ExternalId, NodeId, SocialGraph};
use crate::textio;

/// Local node index inside one [`ActionDag`].
pub type LocalId = u32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DagEdge {
    pub tail: LocalId,
    pub head: LocalId,
    /// Direct credit given to the tail when the head performs the action.
    pub gamma: f64,
}

/// Propagation graph of one action: users who performed it, and social edges
/// `(u, v)` with `time(u) < time(v)`.
///
/// Local ids follow non-decreasing time, which is a topological order since
/// every edge strictly increases time.
#[derive(Clone, Debug)]
pub struct ActionDag {
    action: ActionId,
    nodes: Vec<NodeId>,
    times: Vec<Timestamp>,
    position: HashMap<NodeId, LocalId>,
    edges: Vec<DagEdge>,
    in_edges: Vec<Vec<u32>>,
    out_edges: Vec<Vec<u32>>,
    credited: bool,
}

impl ActionDag {
    /// Builds the propagation graph for `action`. Credits start at zero.
    pub fn build(graph: &SocialGraph, log: &ActionLog, action: ActionId) -> Result<Self> {
        let idx = log.action_index(action).ok_or(Error::UnknownAction(action))?;
        Ok(Self::build_at(graph, log, idx))
    }

    fn build_at(graph: &SocialGraph, log: &ActionLog, idx: usize) -> Self {
        let performers = log.performers(idx);
        let nodes: Vec<NodeId> = performers.iter().map(|&(u, _)| u).collect();
        let times: Vec<Timestamp> = performers.iter().map(|&(_, t)| t).collect();
        let position: HashMap<NodeId, LocalId> = nodes
            .iter()
            .enumerate()
            .map(|(i, &u)| (u, i as LocalId))
            .collect();
        let mut edges = Vec::new();
        for (i, &u) in nodes.iter().enumerate() {
            for v in graph.out_neighbors(u) {
                if let Some(&j) = position.get(v) {
                    if times[i] < times[j as usize] {
                        edges.push(DagEdge {
                            tail: i as LocalId,
                            head: j,
                            gamma: 0.0,
                        });
                    }
                }
            }
        }
        let mut in_edges = vec![Vec::new(); nodes.len()];
        let mut out_edges = vec![Vec::new(); nodes.len()];
        for (k, e) in edges.iter().enumerate() {
            in_edges[e.head as usize].push(k as u32);
            out_edges[e.tail as usize].push(k as u32);
        }
        ActionDag {
            action: log.actions()[idx],
            nodes,
            times,
            position,
            edges,
            in_edges,
            out_edges,
            credited: false,
        }
    }

    /// Builds the DAG of every action in the log, in action-id order.
    pub fn build_all(graph: &SocialGraph, log: &ActionLog) -> Vec<Self> {
        (0..log.action_count())
            .into_par_iter()
            .map(|idx| Self::build_at(graph, log, idx))
            .collect()
    }

    pub fn action(&self) -> ActionId {
        self.action
    }

    /// Nodes in topological order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, local: LocalId) -> NodeId {
        self.nodes[local as usize]
    }

    pub fn time(&self, local: LocalId) -> Timestamp {
        self.times[local as usize]
    }

    pub fn local(&self, u: NodeId) -> Option<LocalId> {
        self.position.get(&u).copied()
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.position.contains_key(&u)
    }

    pub fn edges(&self) -> &[DagEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The edge in graph ids.
    pub fn global_edge(&self, e: &DagEdge) -> Edge {
        Edge::new(self.node(e.tail), self.node(e.head))
    }

    pub fn global_edges(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.edges.iter().map(|e| (self.global_edge(e), e.gamma))
    }

    /// Index of the edge `(u, v)` in [`Self::edges`], if present.
    pub fn find_edge(&self, e: Edge) -> Option<usize> {
        let tail = self.local(e.src)?;
        let head = self.local(e.dst)?;
        self.out_edges[tail as usize]
            .iter()
            .map(|&k| k as usize)
            .find(|&k| self.edges[k].head == head)
    }

    pub fn gamma(&self, e: Edge) -> Option<f64> {
        self.find_edge(e).map(|k| self.edges[k].gamma)
    }

    /// Indices of edges entering `local`.
    pub fn in_edges(&self, local: LocalId) -> &[u32] {
        &self.in_edges[local as usize]
    }

    /// Indices of edges leaving `local`.
    pub fn out_edges(&self, local: LocalId) -> &[u32] {
        &self.out_edges[local as usize]
    }

    pub fn in_degree(&self, local: LocalId) -> usize {
        self.in_edges[local as usize].len()
    }

    pub fn is_credited(&self) -> bool {
        self.credited
    }

    fn set_gammas(&mut self, gammas: Vec<f64>) -> Result<()> {
        debug_assert_eq!(gammas.len(), self.edges.len());
        for (e, &g) in self.edges.iter().zip(&gammas) {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::CreditOutOfRange {
                    edge: Edge::new(self.nodes[e.tail as usize], self.nodes[e.head as usize]),
                    action: self.action,
                    value: g,
                });
            }
        }
        for (e, g) in self.edges.iter_mut().zip(gammas) {
            e.gamma = g;
        }
        self.credited = true;
        Ok(())
    }
}

/// Explicit direct credits keyed by action and edge.
#[derive(Clone, Debug, Default)]
pub struct CreditTable {
    values: HashMap<(ActionId, Edge), f64>,
}

impl CreditTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, action: ActionId, edge: Edge, gamma: f64) {
        self.values.insert((action, edge), gamma);
    }

    pub fn get(&self, action: ActionId, edge: Edge) -> Option<f64> {
        self.values.get(&(action, edge)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Snapshot of the credits already assigned to `dags`.
    pub fn from_dags(dags: &[ActionDag]) -> Self {
        let mut table = Self::new();
        for dag in dags {
            for (e, g) in dag.global_edges() {
                table.insert(dag.action(), e, g);
            }
        }
        table
    }

    /// Reads `u v action gamma` lines; `u`, `v` are external ids of `graph`.
    pub fn load(path: impl AsRef<Path>, graph: &SocialGraph) -> Result<Self> {
        let path = path.as_ref();
        let mut table = Self::new();
        textio::for_each_record(path, |line, fields| {
            let u: ExternalId = textio::field(path, line, fields, 0, "node id")?;
            let v: ExternalId = textio::field(path, line, fields, 1, "node id")?;
            let action: ActionId = textio::field(path, line, fields, 2, "action id")?;
            let gamma: f64 = textio::field(path, line, fields, 3, "credit")?;
            let lookup = |id| {
                graph
                    .node_of(id)
                    .ok_or_else(|| Error::parse(path, line, format!("unknown node {id}")))
            };
            table.insert(action, Edge::new(lookup(u)?, lookup(v)?), gamma);
            Ok(())
        })?;
        Ok(table)
    }
}

/// How direct credits `γ_(v,u)(a)` are assigned.
#[derive(Clone, Debug, Default)]
pub enum CreditScheme {
    /// `1 / d_in(u, a)` on every edge entering `u`.
    #[default]
    Uniform,
    /// Frequency estimate `|A_{v→u}| / |A_v|`, rescaled per node and action so
    /// incoming credits sum to at most one.
    NormalizedLearned,
    /// Values copied from a table.
    Explicit(CreditTable),
}

/// Assigns direct credits to every DAG. The learned scheme reads propagation
/// counts from all of `dags` and per-user action counts from `log`.
pub fn assign_direct_credits(
    dags: &mut [ActionDag],
    log: &ActionLog,
    scheme: &CreditScheme,
) -> Result<()> {
    match scheme {
        CreditScheme::Uniform => dags.par_iter_mut().try_for_each(|dag| {
            let gammas = dag
                .edges
                .iter()
                .map(|e| 1.0 / dag.in_edges[e.head as usize].len() as f64)
                .collect();
            dag.set_gammas(gammas)
        }),
        CreditScheme::Explicit(table) => dags.par_iter_mut().try_for_each(|dag| {
            let gammas = dag
                .edges
                .iter()
                .map(|e| {
                    let edge = dag.global_edge(e);
                    table.get(dag.action, edge).ok_or(Error::MissingCredit {
                        edge,
                        action: dag.action,
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            dag.set_gammas(gammas)
        }),
        CreditScheme::NormalizedLearned => {
            let mut propagated: HashMap<Edge, u32> = HashMap::new();
            for dag in dags.iter() {
                for e in &dag.edges {
                    *propagated.entry(dag.global_edge(e)).or_default() += 1;
                }
            }
            dags.par_iter_mut().try_for_each(|dag| {
                let raw: Vec<f64> = dag
                    .edges
                    .iter()
                    .map(|e| {
                        let edge = dag.global_edge(e);
                        propagated[&edge] as f64 / log.actions_of_count(edge.src) as f64
                    })
                    .collect();
                let mut gammas = raw.clone();
                for ins in &dag.in_edges {
                    let total: f64 = ins.iter().map(|&k| raw[k as usize]).sum();
                    if total > 1.0 {
                        for &k in ins {
                            gammas[k as usize] = raw[k as usize] / total;
                        }
                    }
                }
                dag.set_gammas(gammas)
            })
        }
    }
}
