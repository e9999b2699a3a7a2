//! Per-edge sequential baseline.
//!
//! The batch is replayed one link at a time. After each single-link change
//! the residual is amended for the one row that changed and forward push
//! runs to convergence before the next change. Node deletion removes the
//! node's links one by one and then drops the isolated node; node insertion
//! adds an isolated node and then its links one by one.
//!
//! The replay runs in a union index space: old IDs `0..n` followed by the
//! inserted nodes at `n + k`. Dropped nodes stay behind as unreachable,
//! zero-valued slots and are discarded when mapping back to new IDs.

use std::time::Instant;

use super::{UpdateProblem, UpdateRun};
use crate::error::{Error, Result};
use crate::graph::{out_neighbors_effective, Adjacency, Graph, IdMap, NodeId, RowDelta};
use crate::solver::{NodeScores, PprSolution, PushEngine, SolverStats};

/// One step of the replay, in union IDs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeMutation {
    DeleteEdge(NodeId, NodeId),
    /// Remove a node that no longer has any links.
    DropNode(NodeId),
    AddNode(NodeId),
    InsertEdge(NodeId, NodeId),
}

/// The ordered single-link replay of a batch: node deletions, survivor link
/// deletions, node insertions with their links, survivor link insertions.
/// Within each class links are taken in ascending `(u, v)` order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMutationPlan {
    old_count: usize,
    steps: Vec<EdgeMutation>,
}

impl EdgeMutationPlan {
    pub fn build(old: &Graph, new: &Graph, map: &IdMap) -> EdgeMutationPlan {
        let n = old.node_count();
        let union_of = |nv: NodeId| -> NodeId {
            match map.to_old(nv) {
                Some(o) => o,
                None => n as NodeId + map.inserted_index(nv).expect("inserted node") as NodeId,
            }
        };
        let delta = RowDelta::compute(old, new, map);
        let mut steps = Vec::new();

        if !map.deleted().is_empty() {
            let rev = old.transpose();
            for &u in map.deleted() {
                // Links to a deleted node handled earlier are already gone.
                let gone = |w: NodeId| w < u && map.is_deleted(w);
                let mut links: Vec<(NodeId, NodeId)> = old
                    .out_links(u)
                    .iter()
                    .filter(|&&v| !gone(v))
                    .map(|&v| (u, v))
                    .chain(rev.out_links(u).iter().filter(|&&w| !gone(w)).map(|&w| (w, u)))
                    .collect();
                links.sort_unstable();
                links.dedup();
                steps.extend(links.into_iter().map(|(a, b)| EdgeMutation::DeleteEdge(a, b)));
                steps.push(EdgeMutation::DropNode(u));
            }
        }

        for &u in delta.candidates() {
            let nu = map.to_new(u).expect("survivor");
            for &v in old.out_links(u) {
                if let Some(nv) = map.to_new(v) {
                    if !new.has_edge(nu, nv) {
                        steps.push(EdgeMutation::DeleteEdge(u, v));
                    }
                }
            }
        }

        let mut inserted_links = Vec::new();
        for (k, &w) in map.inserted().iter().enumerate() {
            steps.push(EdgeMutation::AddNode(n as NodeId + k as NodeId));
            inserted_links.extend(new.out_links(w).iter().map(|&t| (union_of(w), union_of(t))));
        }
        let mut survivor_links = Vec::new();
        for &u in delta.candidates() {
            let nu = map.to_new(u).expect("survivor");
            for &nv in new.out_links(nu) {
                match map.to_old(nv) {
                    Some(v) if !old.has_edge(u, v) => survivor_links.push((u, v)),
                    Some(_) => {}
                    None => inserted_links.push((u, union_of(nv))),
                }
            }
        }
        inserted_links.sort_unstable();
        steps.extend(inserted_links.into_iter().map(|(a, b)| EdgeMutation::InsertEdge(a, b)));
        steps.extend(survivor_links.into_iter().map(|(a, b)| EdgeMutation::InsertEdge(a, b)));

        EdgeMutationPlan { old_count: n, steps }
    }

    pub fn steps(&self) -> &[EdgeMutation] {
        &self.steps
    }

    /// Number of single-link changes (node add/drop steps excluded).
    pub fn link_changes(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, EdgeMutation::DeleteEdge(..) | EdgeMutation::InsertEdge(..)))
            .count()
    }
}

/// Mutable sorted adjacency lists.
struct DynamicAdjacency {
    rows: Vec<Vec<NodeId>>,
}

impl DynamicAdjacency {
    fn from_graph(g: &Graph, extra: usize) -> DynamicAdjacency {
        let mut rows: Vec<Vec<NodeId>> = g.nodes().map(|u| g.out_links(u).to_vec()).collect();
        rows.resize_with(g.node_count() + extra, Vec::new);
        DynamicAdjacency { rows }
    }

    fn insert(&mut self, u: NodeId, v: NodeId) -> bool {
        let row = &mut self.rows[u as usize];
        match row.binary_search(&v) {
            Ok(_) => false,
            Err(pos) => {
                row.insert(pos, v);
                true
            }
        }
    }

    fn remove(&mut self, u: NodeId, v: NodeId) -> bool {
        let row = &mut self.rows[u as usize];
        match row.binary_search(&v) {
            Ok(pos) => {
                row.remove(pos);
                true
            }
            Err(_) => false,
        }
    }
}

impl Adjacency for DynamicAdjacency {
    fn node_count(&self) -> usize {
        self.rows.len()
    }

    fn out_links(&self, u: NodeId) -> &[NodeId] {
        &self.rows[u as usize]
    }
}

pub fn per_edge_baseline(p: &UpdateProblem<'_>) -> Result<UpdateRun> {
    let plan = EdgeMutationPlan::build(p.old_graph, p.new_graph, p.id_map);
    per_edge_baseline_planned(p, &plan)
}

/// Replays `plan`, which must have been built for the problem's graphs.
pub fn per_edge_baseline_planned(p: &UpdateProblem<'_>, plan: &EdgeMutationPlan) -> Result<UpdateRun> {
    let start = Instant::now();
    let map = p.id_map;
    let n = p.old_graph.node_count();
    debug_assert_eq!(plan.old_count, n);
    let union_n = n + map.inserted().len();
    let source = p.source_old;
    let cfg = &p.cfg;
    let alpha = cfg.alpha;

    let mut adj = DynamicAdjacency::from_graph(p.old_graph, map.inserted().len());
    let mut pi = p.prior_pi.as_slice().to_vec();
    pi.resize(union_n, 0.0);
    let mut r = p.prior_r.as_slice().to_vec();
    r.resize(union_n, 0.0);

    let mut engine = PushEngine::new(union_n);
    let mut touched = vec![false; union_n];
    let mut touched_count = 0usize;
    let mut pushes = 0u64;
    let mut solve_time = 0.0;
    let mut seeds: Vec<NodeId> = Vec::new();

    // A prior converged at this threshold contributes no initial seeds.
    seeds.extend((0..union_n as NodeId).filter(|&i| r[i as usize].abs() > cfg.epsilon));
    let steps = std::iter::once(None).chain(plan.steps().iter().copied().map(Some));

    for step in steps {
        match step {
            None => {}
            Some(EdgeMutation::DeleteEdge(u, v)) | Some(EdgeMutation::InsertEdge(u, v)) => {
                let x = pi[u as usize];
                if x != 0.0 {
                    let row = out_neighbors_effective(&adj, u, source);
                    let w = alpha * x * row.weight();
                    for t in row.targets() {
                        r[t as usize] -= w;
                        seeds.push(t);
                    }
                }
                if matches!(step, Some(EdgeMutation::DeleteEdge(..))) {
                    adj.remove(u, v);
                } else {
                    adj.insert(u, v);
                }
                if x != 0.0 {
                    let row = out_neighbors_effective(&adj, u, source);
                    let w = alpha * x * row.weight();
                    for t in row.targets() {
                        r[t as usize] += w;
                        seeds.push(t);
                    }
                }
            }
            Some(EdgeMutation::DropNode(u)) => {
                debug_assert!(adj.out_links(u).is_empty());
                let x = pi[u as usize];
                if x != 0.0 {
                    let row = out_neighbors_effective(&adj, u, source);
                    let w = alpha * x * row.weight();
                    for t in row.targets() {
                        r[t as usize] -= w;
                        seeds.push(t);
                    }
                }
                pi[u as usize] = 0.0;
                r[u as usize] = 0.0;
            }
            // An isolated node with zero estimate and residual changes nothing.
            Some(EdgeMutation::AddNode(_)) => {}
        }
        if seeds.is_empty() {
            continue;
        }
        seeds.sort_unstable();
        seeds.dedup();
        let t0 = Instant::now();
        let counts = engine.run(&adj, source, &mut pi, &mut r, seeds.iter().copied(), cfg, |_| {});
        solve_time += t0.elapsed().as_secs_f64();
        pushes += counts.pushes;
        for &i in engine.last_touched() {
            if !touched[i as usize] {
                touched[i as usize] = true;
                touched_count += 1;
            }
        }
        if counts.exhausted {
            let partial = finish(p, &pi, &r, pushes, touched_count, start);
            return Err(Error::PushBudgetExceeded {
                budget: cfg.max_pushes.unwrap_or(u64::MAX),
                partial: Box::new(partial),
            });
        }
        seeds.clear();
    }

    let solution = finish(p, &pi, &r, pushes, touched_count, start);
    let initializer_time_s = (solution.stats.wall_time_s - solve_time).max(0.0);
    Ok(UpdateRun {
        solution,
        initializer_time_s,
    })
}

fn finish(
    p: &UpdateProblem<'_>,
    pi: &[f64],
    r: &[f64],
    pushes: u64,
    touched_nodes: usize,
    start: Instant,
) -> PprSolution {
    let map = p.id_map;
    let n = p.old_graph.node_count();
    let n_new = map.new_count();
    let mut pi_new = vec![0.0; n_new];
    let mut r_new = vec![0.0; n_new];
    for (u, nu) in map.survivors() {
        pi_new[nu as usize] = pi[u as usize];
        r_new[nu as usize] = r[u as usize];
    }
    for (k, &w) in map.inserted().iter().enumerate() {
        pi_new[w as usize] = pi[n + k];
        r_new[w as usize] = r[n + k];
    }
    let r_new = NodeScores::from_vec(r_new);
    PprSolution {
        pi: NodeScores::from_vec(pi_new),
        stats: SolverStats {
            pushes,
            touched_nodes,
            wall_time_s: start.elapsed().as_secs_f64(),
            initial_residual_l1: p.prior_r.l1(),
            final_residual_l1: r_new.l1(),
        },
        r: r_new,
    }
}
