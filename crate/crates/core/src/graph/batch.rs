//! Batched web evolution: node insertion/deletion plus link changes.

use std::collections::BTreeSet;

use super::{Graph, NodeId};
use crate::error::{invalid, Result};

/// One end of an edge attached to an inserted node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    /// A surviving node, by its ID in the old graph.
    Existing(NodeId),
    /// The k-th inserted node of the same batch.
    Inserted(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InsertedNode {
    /// Caller-side identity (for example the node's ID in a source dataset).
    pub label: Option<u64>,
    pub out_edges: Vec<Endpoint>,
    pub in_edges: Vec<Endpoint>,
}

/// A batch of changes against an old graph. Existing nodes are named by
/// their old IDs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PerturbationBatch {
    pub inserted_nodes: Vec<InsertedNode>,
    pub deleted_nodes: BTreeSet<NodeId>,
    pub inserted_edges: BTreeSet<(NodeId, NodeId)>,
    pub deleted_edges: BTreeSet<(NodeId, NodeId)>,
}

impl PerturbationBatch {
    pub fn is_empty(&self) -> bool {
        self.inserted_nodes.is_empty()
            && self.deleted_nodes.is_empty()
            && self.inserted_edges.is_empty()
            && self.deleted_edges.is_empty()
    }

    pub fn has_node_changes(&self) -> bool {
        !self.inserted_nodes.is_empty() || !self.deleted_nodes.is_empty()
    }

    pub fn validate(&self, g: &Graph) -> Result<()> {
        let n = g.node_count();
        let a = self.inserted_nodes.len();
        for &u in &self.deleted_nodes {
            if u as usize >= n {
                return Err(invalid(format!("deleted node {u} not in graph")));
            }
        }
        let surviving = |u: NodeId, what: &str| -> Result<()> {
            if u as usize >= n {
                Err(invalid(format!("{what} references unknown node {u}")))
            } else if self.deleted_nodes.contains(&u) {
                Err(invalid(format!("{what} references deleted node {u}")))
            } else {
                Ok(())
            }
        };
        for &(u, v) in &self.inserted_edges {
            surviving(u, "inserted edge")?;
            surviving(v, "inserted edge")?;
            if g.has_edge(u, v) {
                return Err(invalid(format!("inserted edge ({u}, {v}) already present")));
            }
            if self.deleted_edges.contains(&(u, v)) {
                return Err(invalid(format!("edge ({u}, {v}) both inserted and deleted")));
            }
        }
        for &(u, v) in &self.deleted_edges {
            surviving(u, "deleted edge")?;
            surviving(v, "deleted edge")?;
            if !g.has_edge(u, v) {
                return Err(invalid(format!("deleted edge ({u}, {v}) not present")));
            }
        }
        for (k, node) in self.inserted_nodes.iter().enumerate() {
            for ep in node.out_edges.iter().chain(&node.in_edges) {
                match *ep {
                    Endpoint::Existing(u) => surviving(u, "inserted node edge")?,
                    Endpoint::Inserted(j) if j >= a => {
                        return Err(invalid(format!(
                            "inserted node {k} references inserted node {j} of {a}"
                        )))
                    }
                    Endpoint::Inserted(_) => {}
                }
            }
        }
        Ok(())
    }
}

/// Bookkeeping between old and new node IDs across a batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdMap {
    old_to_new: Vec<Option<NodeId>>,
    new_to_old: Vec<Option<NodeId>>,
    inserted: Vec<NodeId>,
    deleted: Vec<NodeId>,
}

impl IdMap {
    pub fn identity(n: usize) -> IdMap {
        let ids: Vec<Option<NodeId>> = (0..n as NodeId).map(Some).collect();
        IdMap {
            old_to_new: ids.clone(),
            new_to_old: ids,
            inserted: Vec::new(),
            deleted: Vec::new(),
        }
    }

    /// Survivors keep their relative order and are packed first; inserted
    /// nodes follow in batch order.
    pub fn compacting(old_count: usize, deleted: &BTreeSet<NodeId>, inserted: usize) -> IdMap {
        let mut old_to_new = Vec::with_capacity(old_count);
        let mut new_to_old = Vec::with_capacity(old_count - deleted.len() + inserted);
        for u in 0..old_count as NodeId {
            if deleted.contains(&u) {
                old_to_new.push(None);
            } else {
                old_to_new.push(Some(new_to_old.len() as NodeId));
                new_to_old.push(Some(u));
            }
        }
        let first_inserted = new_to_old.len() as NodeId;
        new_to_old.extend(std::iter::repeat_n(None, inserted));
        IdMap {
            old_to_new,
            new_to_old,
            inserted: (first_inserted..first_inserted + inserted as NodeId).collect(),
            deleted: deleted.iter().copied().collect(),
        }
    }

    pub fn old_count(&self) -> usize {
        self.old_to_new.len()
    }

    pub fn new_count(&self) -> usize {
        self.new_to_old.len()
    }

    pub fn to_new(&self, old: NodeId) -> Option<NodeId> {
        self.old_to_new.get(old as usize).copied().flatten()
    }

    pub fn to_old(&self, new: NodeId) -> Option<NodeId> {
        self.new_to_old.get(new as usize).copied().flatten()
    }

    /// New IDs of inserted nodes, in batch order.
    pub fn inserted(&self) -> &[NodeId] {
        &self.inserted
    }

    /// Old IDs of deleted nodes, ascending.
    pub fn deleted(&self) -> &[NodeId] {
        &self.deleted
    }

    pub fn is_deleted(&self, old: NodeId) -> bool {
        self.old_to_new.get(old as usize) == Some(&None)
    }

    pub fn has_node_changes(&self) -> bool {
        !self.inserted.is_empty() || !self.deleted.is_empty()
    }

    /// `(old, new)` for every surviving node, ascending.
    pub fn survivors(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.old_to_new
            .iter()
            .enumerate()
            .filter_map(|(old, new)| new.map(|n| (old as NodeId, n)))
    }

    /// Index of a new ID among the inserted nodes, if it is one.
    pub fn inserted_index(&self, new: NodeId) -> Option<usize> {
        if self.to_old(new).is_some() || new as usize >= self.new_count() {
            return None;
        }
        self.inserted.binary_search(&new).ok()
    }

    pub fn validate(&self) -> Result<()> {
        let survivors = self.old_to_new.iter().flatten().count();
        if survivors + self.deleted.len() != self.old_count() {
            return Err(invalid("survivors and deleted nodes do not cover the old graph"));
        }
        if survivors + self.inserted.len() != self.new_count() {
            return Err(invalid("survivors and inserted nodes do not cover the new graph"));
        }
        for (old, new) in self.survivors() {
            if self.to_old(new) != Some(old) {
                return Err(invalid(format!("survivor map not bijective at old node {old}")));
            }
        }
        for &d in &self.deleted {
            if !self.is_deleted(d) {
                return Err(invalid(format!("node {d} listed as deleted but maps forward")));
            }
        }
        for &i in &self.inserted {
            if self.to_old(i).is_some() || i as usize >= self.new_count() {
                return Err(invalid(format!("node {i} listed as inserted but has an old ID")));
            }
        }
        Ok(())
    }
}

/// Builds the evolved graph. The input graph is left untouched.
pub fn apply_batch(g: &Graph, b: &PerturbationBatch) -> Result<(Graph, IdMap)> {
    b.validate(g)?;
    let map = IdMap::compacting(g.node_count(), &b.deleted_nodes, b.inserted_nodes.len());
    let fwd = |u: NodeId| map.to_new(u).expect("validated survivor");
    let ins = |k: usize| map.inserted()[k];
    let resolve = |ep: Endpoint| match ep {
        Endpoint::Existing(u) => fwd(u),
        Endpoint::Inserted(k) => ins(k),
    };

    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(g.edge_count());
    for (u, v) in g.edges() {
        if let (Some(nu), Some(nv)) = (map.to_new(u), map.to_new(v)) {
            if !b.deleted_edges.contains(&(u, v)) {
                edges.push((nu, nv));
            }
        }
    }
    edges.extend(b.inserted_edges.iter().map(|&(u, v)| (fwd(u), fwd(v))));
    for (k, node) in b.inserted_nodes.iter().enumerate() {
        let w = ins(k);
        edges.extend(node.out_edges.iter().map(|&ep| (w, resolve(ep))));
        edges.extend(node.in_edges.iter().map(|&ep| (resolve(ep), w)));
    }
    let new = Graph::from_edges(map.new_count(), edges)?;
    Ok((new, map))
}

/// The batch that undoes `b`: it deletes the inserted nodes, re-inserts the
/// deleted nodes with their old links, and swaps the link delta. Node IDs
/// refer to `new`.
pub fn reverse_batch(old: &Graph, b: &PerturbationBatch, map: &IdMap) -> PerturbationBatch {
    let fwd = |u: NodeId| map.to_new(u).expect("survivor");
    let deleted: Vec<NodeId> = b.deleted_nodes.iter().copied().collect();
    let slot = |u: NodeId| deleted.binary_search(&u).ok();
    let rev = old.transpose();

    let inserted_nodes = deleted
        .iter()
        .map(|&u| {
            let out_edges = old
                .out_links(u)
                .iter()
                .map(|&v| match slot(v) {
                    Some(k) => Endpoint::Inserted(k),
                    None => Endpoint::Existing(fwd(v)),
                })
                .collect();
            // Links from other deleted nodes are carried by their out-edges.
            let in_edges = rev
                .out_links(u)
                .iter()
                .filter(|&&w| slot(w).is_none())
                .map(|&w| Endpoint::Existing(fwd(w)))
                .collect();
            InsertedNode {
                label: Some(u64::from(u)),
                out_edges,
                in_edges,
            }
        })
        .collect();

    PerturbationBatch {
        inserted_nodes,
        deleted_nodes: map.inserted().iter().copied().collect(),
        inserted_edges: b.deleted_edges.iter().map(|&(u, v)| (fwd(u), fwd(v))).collect(),
        deleted_edges: b.inserted_edges.iter().map(|&(u, v)| (fwd(u), fwd(v))).collect(),
    }
}
