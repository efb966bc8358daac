//! Directed social graph with dense node ids.
//!
//! Input files may use arbitrary non-negative integer ids. They are mapped to
//! dense ids `0..n` in ascending order of the original id, so the
//! lexicographic order of edges is the same under both numberings.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::textio;

/// Dense node index.
pub type NodeId = u32;
/// Node id as written in input files.
pub type ExternalId = u64;

/// A directed edge `(src, dst)`. Ordering is lexicographic on `(src, dst)`,
/// which is the tie-breaking order used by every selection routine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
}

impl Edge {
    pub const fn new(src: NodeId, dst: NodeId) -> Self {
        Edge { src, dst }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.src, self.dst)
    }
}

impl From<(NodeId, NodeId)> for Edge {
    fn from((src, dst): (NodeId, NodeId)) -> Self {
        Edge { src, dst }
    }
}

/// Counts of input lines discarded while building a graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GraphLoadStats {
    pub self_loops: usize,
    pub duplicates: usize,
}

/// Immutable directed graph. Adjacency lists are sorted and free of
/// duplicates and self-loops; `in_adj` is the transpose of `out_adj`.
#[derive(Clone, Debug)]
pub struct SocialGraph {
    external: Vec<ExternalId>,
    out_adj: Vec<Vec<NodeId>>,
    in_adj: Vec<Vec<NodeId>>,
    num_edges: usize,
}

impl SocialGraph {
    /// Builds a graph over nodes `0..n` whose external ids equal the dense ids.
    pub fn from_edges<I>(n: usize, edges: I) -> (Self, GraphLoadStats)
    where
        I: IntoIterator,
        I::Item: Into<Edge>,
    {
        let external = (0..n as ExternalId).collect();
        Self::assemble(external, edges.into_iter().map(Into::into))
    }

    /// Builds a graph from edges given in external ids. Every endpoint becomes
    /// a node; `extra_nodes` adds isolated nodes.
    pub fn from_external_edges(
        edges: &[(ExternalId, ExternalId)],
        extra_nodes: &[ExternalId],
    ) -> (Self, GraphLoadStats) {
        let mut ids: Vec<ExternalId> = edges
            .iter()
            .flat_map(|&(u, v)| [u, v])
            .chain(extra_nodes.iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        let dense = |id: ExternalId| ids.binary_search(&id).expect("id collected above") as NodeId;
        let mapped: Vec<Edge> = edges
            .iter()
            .map(|&(u, v)| Edge::new(dense(u), dense(v)))
            .collect();
        Self::assemble(ids, mapped.into_iter())
    }

    fn assemble(external: Vec<ExternalId>, edges: impl Iterator<Item = Edge>) -> (Self, GraphLoadStats) {
        let n = external.len();
        let mut stats = GraphLoadStats::default();
        let mut out_adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for e in edges {
            assert!(
                (e.src as usize) < n && (e.dst as usize) < n,
                "edge {e} out of range for {n} nodes"
            );
            if e.src == e.dst {
                stats.self_loops += 1;
                continue;
            }
            out_adj[e.src as usize].push(e.dst);
        }
        let mut in_adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        let mut num_edges = 0;
        for (u, outs) in out_adj.iter_mut().enumerate() {
            let before = outs.len();
            outs.sort_unstable();
            outs.dedup();
            stats.duplicates += before - outs.len();
            num_edges += outs.len();
            for &v in outs.iter() {
                in_adj[v as usize].push(u as NodeId);
            }
        }
        let graph = SocialGraph {
            external,
            out_adj,
            in_adj,
            num_edges,
        };
        (graph, stats)
    }

    /// Reads a `u v` edge list. Lines starting with `#` are comments.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, GraphLoadStats)> {
        let path = path.as_ref();
        let mut edges = Vec::new();
        textio::for_each_record(path, |line, fields| {
            let u: ExternalId = textio::field(path, line, fields, 0, "node id")?;
            let v: ExternalId = textio::field(path, line, fields, 1, "node id")?;
            edges.push((u, v));
            Ok(())
        })?;
        let (graph, stats) = Self::from_external_edges(&edges, &[]);
        if stats.self_loops > 0 {
            log::warn!("{}: dropped {} self-loop(s)", path.display(), stats.self_loops);
        }
        Ok((graph, stats))
    }

    /// Writes the graph as a `u v` edge list using external ids.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let lines = self.edges().map(|e| {
            format!("{} {}", self.external_id(e.src), self.external_id(e.dst))
        });
        textio::write_lines(path.as_ref(), lines)
    }

    pub fn node_count(&self) -> usize {
        self.external.len()
    }

    pub fn edge_count(&self) -> usize {
        self.num_edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }

    /// All edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(u, outs)| outs.iter().map(move |&v| Edge::new(u as NodeId, v)))
    }

    pub fn out_neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.out_adj[u as usize]
    }

    pub fn in_neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.in_adj[u as usize]
    }

    /// In-degree plus out-degree.
    pub fn total_degree(&self, u: NodeId) -> usize {
        self.out_adj[u as usize].len() + self.in_adj[u as usize].len()
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        self.out_adj
            .get(e.src as usize)
            .is_some_and(|outs| outs.binary_search(&e.dst).is_ok())
    }

    pub fn external_id(&self, u: NodeId) -> ExternalId {
        self.external[u as usize]
    }

    pub fn node_of(&self, id: ExternalId) -> Option<NodeId> {
        self.external.binary_search(&id).ok().map(|i| i as NodeId)
    }

    pub fn require_node(&self, id: ExternalId) -> Result<NodeId> {
        self.node_of(id).ok_or(Error::UnknownNode(id))
    }

    /// Same node set with the given edges deleted.
    pub fn without_edges(&self, removed: &HashSet<Edge>) -> SocialGraph {
        let out_adj: Vec<Vec<NodeId>> = self
            .out_adj
            .iter()
            .enumerate()
            .map(|(u, outs)| {
                outs.iter()
                    .copied()
                    .filter(|&v| !removed.contains(&Edge::new(u as NodeId, v)))
                    .collect()
            })
            .collect();
        let mut in_adj: Vec<Vec<NodeId>> = vec![Vec::new(); self.node_count()];
        let mut num_edges = 0;
        for (u, outs) in out_adj.iter().enumerate() {
            num_edges += outs.len();
            for &v in outs {
                in_adj[v as usize].push(u as NodeId);
            }
        }
        SocialGraph {
            external: self.external.clone(),
            out_adj,
            in_adj,
            num_edges,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_triangle() {
        let f = write_tmp("# comment\n0 1\n1 2\n\n0 2\n");
        let (g, stats) = SocialGraph::load(f.path()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(stats, GraphLoadStats::default());
        assert!(g.has_edge(Edge::new(0, 2)));
        assert!(!g.has_edge(Edge::new(2, 0)));
    }

    #[test]
    fn drops_self_loops() {
        let f = write_tmp("0 0\n");
        let (g, stats) = SocialGraph::load(f.path()).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(stats.self_loops, 1);
    }

    #[test]
    fn dedups_edges() {
        let f = write_tmp("0 1\n0 1\n");
        let (g, stats) = SocialGraph::load(f.path()).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(stats.duplicates, 1);
    }

    #[test]
    fn reports_bad_token_with_line() {
        let f = write_tmp("0 1\n1 x\n");
        let err = SocialGraph::load(f.path()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
        let f = write_tmp("0 -1\n");
        assert!(matches!(SocialGraph::load(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            SocialGraph::load("/nonexistent/graph.txt"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn sparse_ids_are_remapped_in_order() {
        let f = write_tmp("100 7\n7 55\n");
        let (g, _) = SocialGraph::load(f.path()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.node_of(7), Some(0));
        assert_eq!(g.node_of(55), Some(1));
        assert_eq!(g.node_of(100), Some(2));
        assert_eq!(g.external_id(2), 100);
        assert!(g.has_edge(Edge::new(2, 0)));
    }

    #[test]
    fn adjacency_is_transposed() {
        let (g, _) = SocialGraph::from_edges(4, [(0, 1), (2, 1), (1, 3), (3, 0)]);
        for e in g.edges() {
            assert!(g.in_neighbors(e.dst).contains(&e.src));
        }
        let in_total: usize = g.nodes().map(|u| g.in_neighbors(u).len()).sum();
        assert_eq!(in_total, g.edge_count());
        assert_eq!(g.total_degree(1), 3);
    }

    #[test]
    fn removing_edges() {
        let (g, _) = SocialGraph::from_edges(3, [(0, 1), (1, 2), (0, 2)]);
        let removed: HashSet<Edge> = [Edge::new(0, 2)].into_iter().collect();
        let h = g.without_edges(&removed);
        assert_eq!(h.edge_count(), 2);
        assert!(!h.has_edge(Edge::new(0, 2)));
        assert!(h.in_neighbors(2) == [1]);
    }

    #[test]
    fn save_then_load() {
        let (g, _) = SocialGraph::from_external_edges(&[(10, 20), (20, 30)], &[]);
        let f = tempfile::NamedTempFile::new().unwrap();
        g.save(f.path()).unwrap();
        let (h, _) = SocialGraph::load(f.path()).unwrap();
        assert_eq!(h.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
        assert_eq!(h.external_id(2), 30);
    }
}
