//! Problem inputs: the target set, candidate edges and the deletion constraint.

use std::collections::HashSet;
use std::path::Path;

use crate::actions::ActionLog;
use crate::dag::{assign_direct_credits, ActionDag, CreditScheme};
use crate::error::{Error, Result};
use crate::graph::{Edge, ExternalId, NodeId, SocialGraph};
use crate::textio;

/// The set `X` whose influence is limited.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSet {
    members: Vec<NodeId>,
    mask: Vec<bool>,
}

impl TargetSet {
    pub fn new(node_count: usize, members: impl IntoIterator<Item = NodeId>) -> Self {
        let mut mask = vec![false; node_count];
        let mut list = Vec::new();
        for u in members {
            if !mask[u as usize] {
                mask[u as usize] = true;
                list.push(u);
            }
        }
        list.sort_unstable();
        TargetSet { members: list, mask }
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.mask.get(u as usize).copied().unwrap_or(false)
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Parses either a path to a file of ids (whitespace or newline separated)
    /// or an inline comma-separated list such as `3,17,42`.
    pub fn parse(input: &str, graph: &SocialGraph) -> Result<Self> {
        let ids: Vec<ExternalId> = if Path::new(input).is_file() {
            let path = Path::new(input);
            let mut ids = Vec::new();
            textio::for_each_record(path, |line, fields| {
                for i in 0..fields.len() {
                    ids.push(textio::field(path, line, fields, i, "node id")?);
                }
                Ok(())
            })?;
            ids
        } else {
            input.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::invalid(format!("`{s}` is not a node id")))
                })
                .collect::<Result<_>>()?
        };
        let nodes = ids
            .into_iter()
            .map(|id| graph.require_node(id))
            .collect::<Result<Vec<_>>>()?;
        Ok(TargetSet::new(graph.node_count(), nodes))
    }
}

/// Reads a `u v` candidate edge list in external ids.
pub fn load_candidates(path: impl AsRef<Path>, graph: &SocialGraph) -> Result<Vec<Edge>> {
    let path = path.as_ref();
    let mut edges = Vec::new();
    textio::for_each_record(path, |line, fields| {
        let u: ExternalId = textio::field(path, line, fields, 0, "node id")?;
        let v: ExternalId = textio::field(path, line, fields, 1, "node id")?;
        let lookup = |id| {
            graph
                .node_of(id)
                .ok_or_else(|| Error::parse(path, line, format!("unknown node {id}")))
        };
        edges.push(Edge::new(lookup(u)?, lookup(v)?));
        Ok(())
    })?;
    edges.sort_unstable();
    edges.dedup();
    Ok(edges)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    /// At most `k` edges in total.
    Budget(usize),
    /// At most `b` removed edges entering any node.
    PerNode(usize),
}

/// A validated problem instance: targets, candidates and constraint.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub targets: TargetSet,
    /// Sorted, duplicate-free.
    pub candidates: Vec<Edge>,
    pub constraint: Constraint,
}

impl ProblemSpec {
    pub fn new(
        graph: &SocialGraph,
        targets: TargetSet,
        mut candidates: Vec<Edge>,
        constraint: Constraint,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("target set is empty"));
        }
        candidates.sort_unstable();
        candidates.dedup();
        if let Some(e) = candidates.iter().find(|e| !graph.has_edge(**e)) {
            return Err(Error::invalid(format!("candidate {e} is not an edge of the graph")));
        }
        match constraint {
            Constraint::Budget(k) if k >= candidates.len() => {
                return Err(Error::invalid(format!(
                    "budget k={k} must be smaller than the candidate count {}",
                    candidates.len()
                )))
            }
            Constraint::PerNode(0) => return Err(Error::invalid("per-node bound b must be at least 1")),
            _ => {}
        }
        Ok(ProblemSpec {
            targets,
            candidates,
            constraint,
        })
    }
}

/// Social graph, action log and the credited propagation DAGs built from them.
#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: SocialGraph,
    pub log: ActionLog,
    pub dags: Vec<ActionDag>,
}

impl Instance {
    pub fn new(graph: SocialGraph, log: ActionLog, scheme: &CreditScheme) -> Result<Self> {
        let mut dags = ActionDag::build_all(&graph, &log);
        assign_direct_credits(&mut dags, &log, scheme)?;
        Ok(Instance { graph, log, dags })
    }

    /// Edges that occur in at least one propagation DAG, sorted.
    pub fn default_candidates(&self) -> Vec<Edge> {
        default_candidates(&self.dags)
    }
}

/// Union of the DAG edge sets, sorted.
pub fn default_candidates(dags: &[ActionDag]) -> Vec<Edge> {
    let set: HashSet<Edge> = dags
        .iter()
        .flat_map(|d| d.global_edges().map(|(e, _)| e))
        .collect();
    let mut edges: Vec<Edge> = set.into_iter().collect();
    edges.sort_unstable();
    edges
}
