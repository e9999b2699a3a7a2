//! Gauss-Southwell forward push.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::time::Instant;

use super::{NodeScores, PprSolution, PprVector, ResidualVector, Selection, SolverConfig, SolverStats};
use crate::error::{invalid, Error, Result};
use crate::graph::{effective_row, Adjacency, NodeId};

/// State visible to an observer right after a push.
pub struct PushEvent<'a> {
    /// Pushes performed so far in this run, this one included.
    pub step: u64,
    pub node: NodeId,
    /// Residual mass moved into the estimate by this push.
    pub amount: f64,
    pub pi: &'a [f64],
    pub r: &'a [f64],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunCounts {
    pub pushes: u64,
    pub touched_nodes: usize,
    /// The push budget ran out with work left.
    pub exhausted: bool,
}

#[derive(Clone, Copy, Debug)]
struct HeapEntry {
    magnitude: f64,
    node: NodeId,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.magnitude
            .total_cmp(&other.magnitude)
            .then_with(|| other.node.cmp(&self.node))
    }
}

/// Reusable scratch space for push runs over graphs of up to `capacity`
/// nodes. Reusing one engine across many short runs avoids O(n) setup per run.
#[derive(Debug, Default)]
pub struct PushEngine {
    queued: Vec<bool>,
    pushed: Vec<bool>,
    pushed_list: Vec<NodeId>,
    fifo: VecDeque<NodeId>,
    heap: BinaryHeap<HeapEntry>,
}

impl PushEngine {
    pub fn new(capacity: usize) -> PushEngine {
        PushEngine {
            queued: vec![false; capacity],
            pushed: vec![false; capacity],
            ..PushEngine::default()
        }
    }

    fn reserve(&mut self, n: usize) {
        if self.queued.len() < n {
            self.queued.resize(n, false);
            self.pushed.resize(n, false);
        }
    }

    /// Pushes until every |r[i]| <= epsilon, starting from `seeds`. Nodes
    /// over the threshold that are not seeds and never receive mass are not
    /// discovered, so callers must seed every entry they changed.
    pub fn run<G, O>(
        &mut self,
        g: &G,
        source: NodeId,
        pi: &mut [f64],
        r: &mut [f64],
        seeds: impl IntoIterator<Item = NodeId>,
        cfg: &SolverConfig,
        mut observer: O,
    ) -> RunCounts
    where
        G: Adjacency + ?Sized,
        O: FnMut(&PushEvent<'_>),
    {
        let n = g.node_count();
        self.reserve(n);
        for &i in &self.pushed_list {
            self.pushed[i as usize] = false;
        }
        self.pushed_list.clear();
        let eps = cfg.epsilon;
        let alpha = cfg.alpha;
        let budget = cfg.max_pushes.unwrap_or(u64::MAX);
        let mut pushes = 0u64;
        let mut exhausted = false;

        match cfg.selection {
            Selection::Queue => {
                for s in seeds {
                    if r[s as usize].abs() > eps && !self.queued[s as usize] {
                        self.queued[s as usize] = true;
                        self.fifo.push_back(s);
                    }
                }
                while let Some(i) = self.fifo.pop_front() {
                    self.queued[i as usize] = false;
                    let amount = r[i as usize];
                    if amount.abs() <= eps {
                        continue;
                    }
                    if pushes == budget {
                        exhausted = true;
                        break;
                    }
                    pushes += 1;
                    self.mark_pushed(i);
                    pi[i as usize] += amount;
                    r[i as usize] = 0.0;
                    let row = effective_row(g, i, source, cfg.dangling);
                    let share = alpha * amount / row.degree() as f64;
                    for j in row.targets() {
                        let rj = &mut r[j as usize];
                        *rj += share;
                        if rj.abs() > eps && !self.queued[j as usize] {
                            self.queued[j as usize] = true;
                            self.fifo.push_back(j);
                        }
                    }
                    observer(&PushEvent {
                        step: pushes,
                        node: i,
                        amount,
                        pi,
                        r,
                    });
                }
                for i in self.fifo.drain(..) {
                    self.queued[i as usize] = false;
                }
            }
            Selection::MaxResidual => {
                for s in seeds {
                    let magnitude = r[s as usize].abs();
                    if magnitude > eps {
                        self.heap.push(HeapEntry { magnitude, node: s });
                    }
                }
                while let Some(HeapEntry { magnitude, node: i }) = self.heap.pop() {
                    let amount = r[i as usize];
                    // Stale entry: the residual moved since it was queued.
                    if amount.abs() != magnitude || magnitude <= eps {
                        continue;
                    }
                    if pushes == budget {
                        exhausted = true;
                        break;
                    }
                    pushes += 1;
                    self.mark_pushed(i);
                    pi[i as usize] += amount;
                    r[i as usize] = 0.0;
                    let row = effective_row(g, i, source, cfg.dangling);
                    let share = alpha * amount / row.degree() as f64;
                    for j in row.targets() {
                        let rj = &mut r[j as usize];
                        *rj += share;
                        if rj.abs() > eps {
                            self.heap.push(HeapEntry {
                                magnitude: rj.abs(),
                                node: j,
                            });
                        }
                    }
                    observer(&PushEvent {
                        step: pushes,
                        node: i,
                        amount,
                        pi,
                        r,
                    });
                }
                self.heap.clear();
            }
        }

        RunCounts {
            pushes,
            touched_nodes: self.pushed_list.len(),
            exhausted,
        }
    }

    /// Nodes pushed during the most recent run, in first-push order.
    pub fn last_touched(&self) -> &[NodeId] {
        &self.pushed_list
    }

    fn mark_pushed(&mut self, i: NodeId) {
        if !self.pushed[i as usize] {
            self.pushed[i as usize] = true;
            self.pushed_list.push(i);
        }
    }
}

/// Runs forward push from the given estimate and residual until no residual
/// entry exceeds `cfg.epsilon` in magnitude.
pub fn gauss_southwell<G: Adjacency + ?Sized>(
    g: &G,
    source: NodeId,
    pi0: PprVector,
    r0: ResidualVector,
    cfg: &SolverConfig,
) -> Result<PprSolution> {
    gauss_southwell_observed(g, source, pi0, r0, cfg, |_| {})
}

/// [`gauss_southwell`] with a callback after every push.
pub fn gauss_southwell_observed<G, O>(
    g: &G,
    source: NodeId,
    pi0: PprVector,
    r0: ResidualVector,
    cfg: &SolverConfig,
    observer: O,
) -> Result<PprSolution>
where
    G: Adjacency + ?Sized,
    O: FnMut(&PushEvent<'_>),
{
    cfg.validate()?;
    let n = g.node_count();
    if source as usize >= n {
        return Err(invalid(format!("source {source} not in graph of {n} nodes")));
    }
    if pi0.len() != n || r0.len() != n {
        return Err(invalid(format!(
            "vectors of length {} / {} do not match graph of {n} nodes",
            pi0.len(),
            r0.len()
        )));
    }
    let start = Instant::now();
    let initial_residual_l1 = r0.l1();
    let mut pi = pi0.into_vec();
    let mut r = r0.into_vec();
    let seeds: Vec<NodeId> = (0..n as NodeId)
        .filter(|&i| r[i as usize].abs() > cfg.epsilon)
        .collect();
    let mut engine = PushEngine::new(n);
    let counts = engine.run(g, source, &mut pi, &mut r, seeds, cfg, observer);
    let r = NodeScores::from_vec(r);
    let solution = PprSolution {
        pi: NodeScores::from_vec(pi),
        stats: SolverStats {
            pushes: counts.pushes,
            touched_nodes: counts.touched_nodes,
            wall_time_s: start.elapsed().as_secs_f64(),
            initial_residual_l1,
            final_residual_l1: r.l1(),
        },
        r,
    };
    if counts.exhausted {
        return Err(Error::PushBudgetExceeded {
            budget: cfg.max_pushes.unwrap_or(u64::MAX),
            partial: Box::new(solution),
        });
    }
    Ok(solution)
}

/// Forward push from a zero estimate with residual `(1 - alpha) e_source`.
pub fn ppr_from_scratch<G: Adjacency + ?Sized>(g: &G, source: NodeId, cfg: &SolverConfig) -> Result<PprSolution> {
    let n = g.node_count();
    if source as usize >= n {
        return Err(invalid(format!("source {source} not in graph of {n} nodes")));
    }
    gauss_southwell(
        g,
        source,
        NodeScores::zeros(n),
        NodeScores::unit(n, source, 1.0 - cfg.alpha),
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_relative_eq;

    fn cfg(eps: f64) -> SolverConfig {
        SolverConfig::new(0.85, eps).unwrap()
    }

    #[test]
    fn single_dangling_node_restarts_to_itself() {
        let g = Graph::empty(1);
        let sol = gauss_southwell(
            &g,
            0,
            NodeScores::zeros(1),
            NodeScores::unit(1, 0, 0.15),
            &cfg(1e-10),
        )
        .unwrap();
        assert_relative_eq!(sol.pi.get(0), 1.0, epsilon = 1e-9);
        assert!(sol.r.max_abs() <= 1e-10);
    }

    #[test]
    fn two_node_chain_matches_closed_form() {
        // s -> t, t dangling: pi = [1/(1+a), a/(1+a)]
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let sol = ppr_from_scratch(&g, 0, &cfg(1e-12)).unwrap();
        let a = 0.85;
        assert_relative_eq!(sol.pi.get(0), 1.0 / (1.0 + a), epsilon = 1e-10);
        assert_relative_eq!(sol.pi.get(1), a / (1.0 + a), epsilon = 1e-10);
        assert_relative_eq!(sol.stats.initial_residual_l1, 0.15);
    }

    #[test]
    fn both_policies_agree() {
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (1, 2), (2, 0), (2, 3)]).unwrap();
        let q = ppr_from_scratch(&g, 0, &cfg(1e-12)).unwrap();
        let mut c = cfg(1e-12);
        c.selection = Selection::MaxResidual;
        let m = ppr_from_scratch(&g, 0, &c).unwrap();
        assert!(q.pi.l1_distance(&m.pi) < 1e-9);
        assert!(m.r.max_abs() <= 1e-12);
    }

    #[test]
    fn max_residual_prefers_largest_then_lowest_id() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        let mut c = cfg(1e-3);
        c.selection = Selection::MaxResidual;
        let r0 = NodeScores::from_vec(vec![0.1, 0.2, 0.2]);
        let mut order = Vec::new();
        gauss_southwell_observed(&g, 0, NodeScores::zeros(3), r0, &c, |e| order.push(e.node)).unwrap();
        assert_eq!(&order[..2], &[1, 2]);
    }

    #[test]
    fn isolated_node_is_never_pushed() {
        let g = Graph::from_edges(2, [(0, 0)]).unwrap();
        let mut seen = Vec::new();
        let sol = gauss_southwell_observed(
            &g,
            0,
            NodeScores::zeros(2),
            NodeScores::unit(2, 0, 0.15),
            &cfg(1e-10),
            |e| seen.push(e.node),
        )
        .unwrap();
        assert_eq!(sol.pi.get(1), 0.0);
        assert!(seen.iter().all(|&u| u == 0));
        assert_eq!(sol.stats.touched_nodes, 1);
    }

    #[test]
    fn budget_exhaustion_returns_partial_state() {
        let g = Graph::from_edges(2, [(0, 1), (1, 0)]).unwrap();
        let mut c = cfg(1e-12);
        c.max_pushes = Some(3);
        match ppr_from_scratch(&g, 0, &c) {
            Err(Error::PushBudgetExceeded { budget, partial }) => {
                assert_eq!(budget, 3);
                assert_eq!(partial.stats.pushes, 3);
                assert!(partial.r.max_abs() > 1e-12);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_checks() {
        let g = Graph::empty(3);
        assert!(gauss_southwell(&g, 0, NodeScores::zeros(2), NodeScores::zeros(3), &cfg(1e-6)).is_err());
        assert!(ppr_from_scratch(&g, 5, &cfg(1e-6)).is_err());
    }

    #[test]
    fn nothing_to_do_means_zero_pushes() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let r0 = NodeScores::from_vec(vec![1e-7, -1e-7]);
        let sol = gauss_southwell(&g, 0, NodeScores::zeros(2), r0, &cfg(1e-6)).unwrap();
        assert_eq!(sol.stats.pushes, 0);
    }

    #[test]
    fn negative_residuals_are_pushed() {
        let g = Graph::from_edges(2, [(0, 1), (1, 0)]).unwrap();
        let exact = ppr_from_scratch(&g, 0, &cfg(1e-13)).unwrap();
        // Overshoot the estimate at node 1 and let push pull it back.
        let mut pi = exact.pi.clone();
        pi.as_mut_slice()[1] += 0.1;
        let r = crate::solver::residual_of(&g, 0, &pi, 0.85);
        assert!(r.as_slice().iter().any(|&x| x < 0.0));
        let sol = gauss_southwell(&g, 0, pi, r, &cfg(1e-13)).unwrap();
        assert!(sol.pi.l1_distance(&exact.pi) < 1e-10);
    }
}
