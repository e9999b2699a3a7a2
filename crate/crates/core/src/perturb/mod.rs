//! Web-evolution generator.
//!
//! From a full dataset graph `S`, a BFS-sampled node set `A` is held back as
//! future insertions and the remaining web `S \ A` becomes the original web.
//! A uniform node sample `D` of the original web is scheduled for deletion.
//! Edge churn comes from a random permutation of the edges of `S`: the last
//! `k` edges are withheld from the original web and re-inserted, and `l`
//! edges drawn uniformly from the rest are deleted. Applying the batch to
//! the original web yields `S \ D` minus the deleted edges.

mod format;

pub use format::{read_batch, write_batch};

use std::collections::{BTreeSet, VecDeque};

use log::warn;
use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::{apply_batch, Endpoint, Graph, IdMap, InsertedNode, NodeId, PerturbationBatch};

/// Generator behind every seeded draw in this module.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.3, SeedableRng::seed_from_u64)";

/// Perturbation sizes and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbPlan {
    /// Nodes inserted by the batch (`a`).
    pub insert_nodes: usize,
    /// Nodes deleted by the batch (`d`).
    pub delete_nodes: usize,
    /// Withheld-then-inserted edges as a fraction of `|E|`.
    pub insert_edge_fraction: f64,
    /// Deleted edges as a fraction of `|E|`.
    pub delete_edge_fraction: f64,
    pub rng_seed: u64,
}

impl Default for PerturbPlan {
    fn default() -> Self {
        PerturbPlan {
            insert_nodes: 0,
            delete_nodes: 0,
            insert_edge_fraction: 0.0,
            delete_edge_fraction: 0.0,
            rng_seed: 0,
        }
    }
}

impl PerturbPlan {
    /// Sizes used on the full datasets: 20k nodes in, 20k out, 0.5% of edges each way.
    pub fn reference_scale(rng_seed: u64) -> PerturbPlan {
        PerturbPlan {
            insert_nodes: 20_000,
            delete_nodes: 20_000,
            insert_edge_fraction: 0.005,
            delete_edge_fraction: 0.005,
            rng_seed,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.insert_nodes == 0
            && self.delete_nodes == 0
            && self.insert_edge_fraction == 0.0
            && self.delete_edge_fraction == 0.0
    }

    /// Checks ranges and returns warnings for perturbations above 10% of the graph.
    pub fn validate(&self, g: &Graph) -> Result<Vec<String>> {
        for (name, f) in [
            ("insert_edge_fraction", self.insert_edge_fraction),
            ("delete_edge_fraction", self.delete_edge_fraction),
        ] {
            if !(0.0..1.0).contains(&f) {
                return Err(invalid(format!("{name} must lie in [0, 1), got {f}")));
            }
        }
        let n = g.node_count();
        if self.insert_nodes + self.delete_nodes > n {
            return Err(invalid(format!(
                "cannot insert {} and delete {} nodes from a graph of {n}",
                self.insert_nodes, self.delete_nodes
            )));
        }
        let mut warnings = Vec::new();
        if (self.insert_nodes + self.delete_nodes) as f64 > 0.1 * n as f64 {
            warnings.push(format!(
                "node perturbation {} exceeds 10% of {n} nodes",
                self.insert_nodes + self.delete_nodes
            ));
        }
        if self.insert_edge_fraction + self.delete_edge_fraction > 0.1 {
            warnings.push("edge perturbation exceeds 10% of edges".to_string());
        }
        Ok(warnings)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<PerturbPlan> {
        Ok(serde_json::from_str(text)?)
    }
}

/// First `count` nodes in BFS order over out-links from `seed`. When the
/// reachable set runs out, BFS restarts from a random unvisited node.
pub fn bfs_sample<R: Rng>(g: &Graph, seed: NodeId, count: usize, rng: &mut R) -> Result<Vec<NodeId>> {
    let n = g.node_count();
    if !g.contains_node(seed) {
        return Err(invalid(format!("seed {seed} not in graph")));
    }
    if count == 0 || count > n {
        return Err(invalid(format!("sample size {count} must lie in 1..={n}")));
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(count);
    let mut queue = VecDeque::new();
    let mut unvisited = n;
    let mut next_seed = Some(seed);
    while order.len() < count {
        let s = match next_seed.take() {
            Some(s) => s,
            None => {
                // Uniform over unvisited nodes via rank selection.
                let rank = rng.gen_range(0..unvisited);
                (0..n as NodeId)
                    .filter(|&u| !visited[u as usize])
                    .nth(rank)
                    .expect("rank within unvisited")
            }
        };
        visited[s as usize] = true;
        unvisited -= 1;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            if order.len() == count {
                break;
            }
            for &v in g.out_links(u) {
                if !visited[v as usize] {
                    visited[v as usize] = true;
                    unvisited -= 1;
                    queue.push_back(v);
                }
            }
        }
        queue.clear();
    }
    Ok(order)
}

/// Original web, batch, and updated web, with the dataset IDs of every node.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub original: Graph,
    pub batch: PerturbationBatch,
    pub updated: Graph,
    /// Original-web IDs to updated-web IDs.
    pub id_map: IdMap,
    /// Dataset ID of each original-web node.
    pub original_ids: Vec<NodeId>,
    /// Dataset ID of each updated-web node.
    pub updated_ids: Vec<NodeId>,
    /// Dataset IDs held back for insertion, in BFS order.
    pub inserted: Vec<NodeId>,
    /// Dataset IDs deleted by the batch, ascending.
    pub deleted: Vec<NodeId>,
    /// Withheld stream edges touching a deleted node, in dataset IDs. They
    /// appear in neither the original web nor the batch.
    pub withheld_discarded: Vec<(NodeId, NodeId)>,
    pub warnings: Vec<String>,
}

pub fn make_evolution(full: &Graph, plan: &PerturbPlan) -> Result<Evolution> {
    let warnings = plan.validate(full)?;
    for w in &warnings {
        warn!("{w}");
    }
    let n = full.node_count();
    let m = full.edge_count();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);

    // A: BFS from a random seed.
    let inserted: Vec<NodeId> = if plan.insert_nodes > 0 {
        let seed = rng.gen_range(0..n as NodeId);
        bfs_sample(full, seed, plan.insert_nodes, &mut rng)?
    } else {
        Vec::new()
    };
    let mut in_a = vec![false; n];
    for &u in &inserted {
        in_a[u as usize] = true;
    }

    // D: uniform without replacement from S \ A.
    let remaining: Vec<NodeId> = (0..n as NodeId).filter(|&u| !in_a[u as usize]).collect();
    let mut deleted: Vec<NodeId> = index::sample(&mut rng, remaining.len(), plan.delete_nodes)
        .into_iter()
        .map(|i| remaining[i])
        .collect();
    deleted.sort_unstable();
    let mut in_d = vec![false; n];
    for &u in &deleted {
        in_d[u as usize] = true;
    }

    // Edge stream over S.
    let k = (plan.insert_edge_fraction * m as f64).floor() as usize;
    let l = (plan.delete_edge_fraction * m as f64).floor() as usize;
    if k + l > m {
        return Err(invalid(format!("{k} withheld plus {l} deleted edges exceed {m} edges")));
    }
    let edges: Vec<(NodeId, NodeId)> = full.edges().collect();
    let mut stream: Vec<u32> = (0..m as u32).collect();
    stream.shuffle(&mut rng);
    let untouched = |(u, v): (NodeId, NodeId)| {
        !in_a[u as usize] && !in_a[v as usize] && !in_d[u as usize] && !in_d[v as usize]
    };
    let mut withheld = vec![false; m];
    let mut withheld_discarded = Vec::new();
    for &e in &stream[m - k..] {
        let (u, v) = edges[e as usize];
        if in_a[u as usize] || in_a[v as usize] {
            // Already part of A's insertion payload.
            continue;
        }
        withheld[e as usize] = true;
        if in_d[u as usize] || in_d[v as usize] {
            withheld_discarded.push((u, v));
        }
    }
    withheld_discarded.sort_unstable();
    let eligible: Vec<u32> = stream[..m - k]
        .iter()
        .copied()
        .filter(|&e| untouched(edges[e as usize]))
        .collect();
    if l > eligible.len() {
        return Err(invalid(format!(
            "{l} edge deletions requested but only {} edges avoid the node perturbation",
            eligible.len()
        )));
    }
    let mut doomed: Vec<u32> = index::sample(&mut rng, eligible.len(), l)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    doomed.sort_unstable();

    // Original web: S \ A without withheld edges, compacted in dataset order.
    let original_ids = remaining;
    let mut orig_of = vec![NodeId::MAX; n];
    for (i, &u) in original_ids.iter().enumerate() {
        orig_of[u as usize] = i as NodeId;
    }
    let original_edges: Vec<(NodeId, NodeId)> = edges
        .iter()
        .enumerate()
        .filter(|&(e, &(u, v))| !withheld[e] && !in_a[u as usize] && !in_a[v as usize])
        .map(|(_, &(u, v))| (orig_of[u as usize], orig_of[v as usize]))
        .collect();
    let original = Graph::from_sorted_edges(original_ids.len(), &original_edges);
    drop(original_edges);

    // Batch.
    let mut slot_of = vec![usize::MAX; n];
    for (k, &u) in inserted.iter().enumerate() {
        slot_of[u as usize] = k;
    }
    let rev = if inserted.is_empty() { None } else { Some(full.transpose()) };
    let inserted_nodes = inserted
        .iter()
        .map(|&a| {
            let out_edges = full
                .out_links(a)
                .iter()
                .filter(|&&t| !in_d[t as usize])
                .map(|&t| {
                    if in_a[t as usize] {
                        Endpoint::Inserted(slot_of[t as usize])
                    } else {
                        Endpoint::Existing(orig_of[t as usize])
                    }
                })
                .collect();
            // Links from other inserted nodes are carried by their out-edges.
            let in_edges = rev
                .as_ref()
                .expect("transpose built when inserting")
                .out_links(a)
                .iter()
                .filter(|&&w| !in_a[w as usize] && !in_d[w as usize])
                .map(|&w| Endpoint::Existing(orig_of[w as usize]))
                .collect();
            InsertedNode {
                label: Some(u64::from(a)),
                out_edges,
                in_edges,
            }
        })
        .collect();
    let to_orig = |e: usize| {
        let (u, v) = edges[e];
        (orig_of[u as usize], orig_of[v as usize])
    };
    let batch = PerturbationBatch {
        inserted_nodes,
        deleted_nodes: deleted.iter().map(|&u| orig_of[u as usize]).collect(),
        inserted_edges: (0..m).filter(|&e| withheld[e] && untouched(edges[e])).map(to_orig).collect(),
        deleted_edges: doomed.iter().map(|&e| to_orig(e as usize)).collect::<BTreeSet<_>>(),
    };

    let (updated, id_map) = apply_batch(&original, &batch)?;
    let updated_ids = (0..id_map.new_count() as NodeId)
        .map(|nu| match id_map.to_old(nu) {
            Some(o) => original_ids[o as usize],
            None => inserted[id_map.inserted_index(nu).expect("inserted")],
        })
        .collect();

    Ok(Evolution {
        original,
        batch,
        updated,
        id_map,
        original_ids,
        updated_ids,
        inserted,
        deleted,
        withheld_discarded,
        warnings,
    })
}

#[cfg(test)]
mod tests;
