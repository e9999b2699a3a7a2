//! Seeded synthetic graphs and batches for tests, the invariant suite and
//! desk-scale benchmarks.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{Endpoint, Graph, InsertedNode, NodeId, PerturbationBatch};

/// Directed graph with `n` nodes. A `dangling_fraction` of nodes get no
/// out-links; the rest draw a degree uniformly from `1..=2*mean_degree - 1`
/// with uniform targets (self-loops possible).
pub fn random_digraph<R: Rng>(n: usize, mean_degree: f64, dangling_fraction: f64, rng: &mut R) -> Graph {
    let max_deg = ((2.0 * mean_degree).round() as usize).saturating_sub(1).max(1);
    let mut edges = Vec::new();
    for u in 0..n as NodeId {
        if rng.gen_bool(dangling_fraction.clamp(0.0, 1.0)) {
            continue;
        }
        let d = rng.gen_range(1..=max_deg);
        for _ in 0..d {
            edges.push((u, rng.gen_range(0..n as NodeId)));
        }
    }
    Graph::from_edges(n, edges).expect("edges in range")
}

/// Heavy-tailed directed graph resembling a social network: out-degrees are
/// geometric with the given mean, targets mix in-degree-preferential and
/// uniform choice, and a share of links is reciprocated.
pub fn social_digraph<R: Rng>(n: usize, mean_degree: f64, rng: &mut R) -> Graph {
    const DANGLING: f64 = 0.05;
    const PREFERENTIAL: f64 = 0.6;
    const RECIPROCAL: f64 = 0.3;
    // Reciprocation adds edges; scale the drawn degree so the mean lands near target.
    let draw_mean = (mean_degree / (1.0 + RECIPROCAL)).max(1.0);
    let stop = 1.0 / draw_mean;
    let mut heads: Vec<NodeId> = Vec::new();
    let mut edges = Vec::new();
    for u in 0..n as NodeId {
        if rng.gen_bool(DANGLING) {
            continue;
        }
        let mut d = 1;
        while !rng.gen_bool(stop) && d < n / 2 {
            d += 1;
        }
        for _ in 0..d {
            let v = if !heads.is_empty() && rng.gen_bool(PREFERENTIAL) {
                heads[rng.gen_range(0..heads.len())]
            } else {
                rng.gen_range(0..n as NodeId)
            };
            if v == u {
                continue;
            }
            edges.push((u, v));
            heads.push(v);
            if rng.gen_bool(RECIPROCAL) {
                edges.push((v, u));
                heads.push(u);
            }
        }
    }
    Graph::from_edges(n, edges).expect("edges in range")
}

/// Upper limits for [`random_batch`]; actual sizes are drawn uniformly up to them.
#[derive(Clone, Debug)]
pub struct BatchShape {
    pub max_inserted_nodes: usize,
    pub max_deleted_nodes: usize,
    pub max_inserted_edges: usize,
    pub max_deleted_edges: usize,
    pub max_links_per_inserted_node: usize,
}

impl Default for BatchShape {
    fn default() -> Self {
        BatchShape {
            max_inserted_nodes: 4,
            max_deleted_nodes: 4,
            max_inserted_edges: 8,
            max_deleted_edges: 8,
            max_links_per_inserted_node: 4,
        }
    }
}

impl BatchShape {
    pub fn links_only(max_flips: usize) -> BatchShape {
        BatchShape {
            max_inserted_nodes: 0,
            max_deleted_nodes: 0,
            max_inserted_edges: max_flips,
            max_deleted_edges: max_flips,
            max_links_per_inserted_node: 0,
        }
    }
}

/// A random valid batch against `g`. `protect` is never deleted.
pub fn random_batch<R: Rng>(
    g: &Graph,
    shape: &BatchShape,
    protect: Option<NodeId>,
    rng: &mut R,
) -> PerturbationBatch {
    let n = g.node_count();
    let mut candidates: Vec<NodeId> = g.nodes().filter(|&u| Some(u) != protect).collect();
    candidates.shuffle(rng);
    // Keep at least one survivor.
    let max_del = shape.max_deleted_nodes.min(n.saturating_sub(1)).min(candidates.len());
    let d = rng.gen_range(0..=max_del);
    let deleted_nodes: BTreeSet<NodeId> = candidates[..d].iter().copied().collect();
    let survivors: Vec<NodeId> = g.nodes().filter(|u| !deleted_nodes.contains(u)).collect();

    let mut deleted_edges = BTreeSet::new();
    let survivor_edges: Vec<(NodeId, NodeId)> = g
        .edges()
        .filter(|(u, v)| !deleted_nodes.contains(u) && !deleted_nodes.contains(v))
        .collect();
    if !survivor_edges.is_empty() && shape.max_deleted_edges > 0 {
        let k = rng.gen_range(0..=shape.max_deleted_edges.min(survivor_edges.len()));
        for &e in survivor_edges.choose_multiple(rng, k) {
            deleted_edges.insert(e);
        }
    }

    let mut inserted_edges = BTreeSet::new();
    if shape.max_inserted_edges > 0 {
        let k = rng.gen_range(0..=shape.max_inserted_edges);
        for _ in 0..k * 4 {
            if inserted_edges.len() >= k {
                break;
            }
            let u = survivors[rng.gen_range(0..survivors.len())];
            let v = survivors[rng.gen_range(0..survivors.len())];
            if !g.has_edge(u, v) {
                inserted_edges.insert((u, v));
            }
        }
    }

    let a = rng.gen_range(0..=shape.max_inserted_nodes);
    let pick = |rng: &mut R, k: usize| -> Endpoint {
        if k > 0 && rng.gen_bool(0.25) {
            Endpoint::Inserted(rng.gen_range(0..k))
        } else {
            Endpoint::Existing(survivors[rng.gen_range(0..survivors.len())])
        }
    };
    let inserted_nodes = (0..a)
        .map(|_| {
            let links = shape.max_links_per_inserted_node;
            let outs = if links == 0 { 0 } else { rng.gen_range(0..=links) };
            let ins = if links == 0 { 0 } else { rng.gen_range(0..=links) };
            InsertedNode {
                label: None,
                out_edges: (0..outs).map(|_| pick(rng, a)).collect(),
                in_edges: (0..ins).map(|_| pick(rng, a)).collect(),
            }
        })
        .collect();

    PerturbationBatch {
        inserted_nodes,
        deleted_nodes,
        inserted_edges,
        deleted_edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_batches_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(1..40);
            let g = random_digraph(n, 3.0, 0.2, &mut rng);
            let b = random_batch(&g, &BatchShape::default(), Some(0), &mut rng);
            b.validate(&g).unwrap();
            assert!(!b.deleted_nodes.contains(&0));
        }
    }

    #[test]
    fn social_graph_degree_is_near_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = social_digraph(5000, 8.0, &mut rng);
        let mean = g.edge_count() as f64 / g.node_count() as f64;
        assert!((5.0..11.0).contains(&mean), "mean degree {mean}");
    }
}
