//! Directed graph storage and transition-row semantics.
//!
//! A [`Graph`] stores out-adjacency in compressed sparse row form. Rows are
//! sorted and free of duplicates. The transition matrix is never built: row
//! `u` has weight `1 / out_degree(u)` on each out-link, and a dangling row is
//! patched on the fly by [`effective_row`] according to a [`DanglingRule`].

mod batch;
mod diff;
mod load;

pub use batch::{apply_batch, reverse_batch, Endpoint, IdMap, InsertedNode, PerturbationBatch};
pub use diff::{changed_rows, RowDelta};
pub use load::{
    load_edge_list, load_edge_list_path, load_edge_list_with, read_binary, write_binary,
    write_edge_list, LoadOptions, LoadStats,
};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type NodeId = u32;

/// Read access to out-links, shared by the immutable CSR graph and the
/// mutable adjacency used by the per-edge baseline.
pub trait Adjacency {
    fn node_count(&self) -> usize;
    fn out_links(&self, u: NodeId) -> &[NodeId];

    fn out_degree(&self, u: NodeId) -> usize {
        self.out_links(u).len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::empty(0)
    }
}

impl Graph {
    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Graph {
        Graph {
            offsets: vec![0; n + 1],
            targets: Vec::new(),
        }
    }

    /// Builds a graph over `n` nodes. Duplicate edges collapse to one.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut edges: Vec<(NodeId, NodeId)> = edges.into_iter().collect();
        if let Some(&(u, v)) = edges
            .iter()
            .find(|&&(u, v)| u as usize >= n || v as usize >= n)
        {
            return Err(invalid(format!("edge ({u}, {v}) outside node range 0..{n}")));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Graph::from_sorted_edges(n, &edges))
    }

    /// `edges` must be sorted, deduplicated and in range.
    pub(crate) fn from_sorted_edges(n: usize, edges: &[(NodeId, NodeId)]) -> Graph {
        let mut offsets = vec![0usize; n + 1];
        for &(u, _) in edges {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = edges.iter().map(|&(_, v)| v).collect();
        Graph { offsets, targets }
    }

    /// Builds a graph from per-node neighbor lists; rows are sorted and deduplicated.
    pub fn from_adjacency(mut rows: Vec<Vec<NodeId>>) -> Result<Graph> {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut targets = Vec::new();
        for (u, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            if let Some(&v) = row.last() {
                if v as usize >= n {
                    return Err(invalid(format!("edge ({u}, {v}) outside node range 0..{n}")));
                }
            }
            targets.extend_from_slice(row);
            offsets.push(targets.len());
        }
        Ok(Graph { offsets, targets })
    }

    pub(crate) fn from_raw_parts(offsets: Vec<usize>, targets: Vec<NodeId>) -> Graph {
        Graph { offsets, targets }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    pub fn out_links(&self, u: NodeId) -> &[NodeId] {
        let u = u as usize;
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        let u = u as usize;
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn is_dangling(&self, u: NodeId) -> bool {
        self.out_degree(u) == 0
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.out_links(u).binary_search(&v).is_ok()
    }

    pub fn contains_node(&self, u: NodeId) -> bool {
        (u as usize) < self.node_count()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }

    /// All edges in ascending `(u, v)` order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes()
            .flat_map(move |u| self.out_links(u).iter().map(move |&v| (u, v)))
    }

    pub fn transpose(&self) -> Graph {
        let n = self.node_count();
        let mut offsets = vec![0usize; n + 1];
        for &v in &self.targets {
            offsets[v as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0; self.targets.len()];
        // Visiting sources in ascending order keeps every transposed row sorted.
        for (u, v) in self.edges() {
            let slot = &mut cursor[v as usize];
            targets[*slot] = u;
            *slot += 1;
        }
        Graph { offsets, targets }
    }

    pub fn dangling_count(&self) -> usize {
        self.nodes().filter(|&u| self.is_dangling(u)).count()
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub(crate) fn targets(&self) -> &[NodeId] {
        &self.targets
    }

    /// Nodes reachable from `source` along stored out-links (source included).
    pub fn reachable_from(&self, source: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![source];
        seen[source as usize] = true;
        while let Some(u) = stack.pop() {
            for &v in self.out_links(u) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

impl Adjacency for Graph {
    fn node_count(&self) -> usize {
        Graph::node_count(self)
    }

    fn out_links(&self, u: NodeId) -> &[NodeId] {
        Graph::out_links(self, u)
    }
}

/// How a node without out-links distributes its mass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DanglingRule {
    /// A single virtual link back to the source node.
    #[default]
    Source,
    /// Uniform links to every node, as in global PageRank.
    Uniform,
}

/// A transition row after the dangling patch has been applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EffectiveRow<'a> {
    Links(&'a [NodeId]),
    Restart(NodeId),
    Uniform(usize),
}

impl<'a> EffectiveRow<'a> {
    pub fn degree(&self) -> usize {
        match *self {
            EffectiveRow::Links(links) => links.len(),
            EffectiveRow::Restart(_) => 1,
            EffectiveRow::Uniform(n) => n,
        }
    }

    /// Transition probability carried by each target.
    pub fn weight(&self) -> f64 {
        1.0 / self.degree() as f64
    }

    pub fn targets(&self) -> RowTargets<'a> {
        match *self {
            EffectiveRow::Links(links) => RowTargets::Links(links.iter()),
            EffectiveRow::Restart(s) => RowTargets::Restart(Some(s)),
            EffectiveRow::Uniform(n) => RowTargets::Uniform(0..n as NodeId),
        }
    }
}

pub enum RowTargets<'a> {
    Links(std::slice::Iter<'a, NodeId>),
    Restart(Option<NodeId>),
    Uniform(std::ops::Range<NodeId>),
}

impl Iterator for RowTargets<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        match self {
            RowTargets::Links(it) => it.next().copied(),
            RowTargets::Restart(s) => s.take(),
            RowTargets::Uniform(r) => r.next(),
        }
    }
}

/// Effective transition row of `u` under the source-restart dangling rule.
pub fn out_neighbors_effective<G: Adjacency + ?Sized>(
    g: &G,
    u: NodeId,
    source: NodeId,
) -> EffectiveRow<'_> {
    effective_row(g, u, source, DanglingRule::Source)
}

pub fn effective_row<G: Adjacency + ?Sized>(
    g: &G,
    u: NodeId,
    source: NodeId,
    rule: DanglingRule,
) -> EffectiveRow<'_> {
    let links = g.out_links(u);
    if !links.is_empty() {
        return EffectiveRow::Links(links);
    }
    match rule {
        DanglingRule::Source => EffectiveRow::Restart(source),
        DanglingRule::Uniform => EffectiveRow::Uniform(g.node_count()),
    }
}
