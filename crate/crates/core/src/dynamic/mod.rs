//! Carrying a converged PPR estimate across a graph update.
//!
//! Each initializer turns the prior `(pi, r)` on the old graph into a
//! starting `(pi, r)` on the new graph, which forward push then refines.
//! Only rows that changed are visited; every other entry is copied.
//!
//! * [`tracking_init`]: link changes only, `r + alpha pi (P* - P)`.
//! * [`vw_init`]: node insertion/deletion plus link changes. Inserted nodes
//!   start at zero, survivors keep their prior values, and the residual picks
//!   up `alpha x (P*_0 - P_0)` on survivors plus `alpha x P*_{0,a}` on
//!   inserted nodes, where `x` is the prior restricted to survivors and
//!   `P_0` is the old survivor-to-survivor block (not renormalized).
//!
//! The plain virtual-web residual keeps the mass `alpha x_d P_{d,0}` that
//! deleted nodes used to send to survivors, so it is not the exact residual
//! of the new estimate. [`UpdateProblem::with_exact_deletion_correction`]
//! subtracts that term.

mod per_edge;

pub use per_edge::{per_edge_baseline, per_edge_baseline_planned, EdgeMutation, EdgeMutationPlan};

use std::time::Instant;

use crate::error::{invalid, Error, Result};
use crate::graph::{out_neighbors_effective, DanglingRule, Graph, IdMap, NodeId, RowDelta};
use crate::solver::{gauss_southwell, residual_of, NodeScores, PprSolution, PprVector, ResidualVector, SolverConfig};

/// Largest entrywise gap tolerated between a prior residual and the exact
/// residual of the prior estimate.
pub const PRIOR_RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Everything an initializer needs: both graphs, the ID correspondence, and
/// the prior estimate with its residual on the old graph.
#[derive(Clone, Debug)]
pub struct UpdateProblem<'a> {
    pub old_graph: &'a Graph,
    pub new_graph: &'a Graph,
    pub id_map: &'a IdMap,
    pub source_old: NodeId,
    pub source_new: NodeId,
    pub prior_pi: &'a PprVector,
    pub prior_r: &'a ResidualVector,
    pub cfg: SolverConfig,
    pub exact_deletion_correction: bool,
    row_delta: Option<&'a RowDelta>,
}

impl<'a> UpdateProblem<'a> {
    /// Validates the inputs, including the prior's residual identity on the old graph.
    pub fn new(
        old_graph: &'a Graph,
        new_graph: &'a Graph,
        id_map: &'a IdMap,
        source_old: NodeId,
        prior_pi: &'a PprVector,
        prior_r: &'a ResidualVector,
        cfg: SolverConfig,
    ) -> Result<UpdateProblem<'a>> {
        cfg.validate()?;
        if cfg.dangling != DanglingRule::Source {
            return Err(Error::Unsupported(
                "updates are defined for the source-restart dangling rule".into(),
            ));
        }
        if id_map.old_count() != old_graph.node_count() || id_map.new_count() != new_graph.node_count() {
            return Err(invalid(format!(
                "id map covers {} -> {} nodes but graphs have {} -> {}",
                id_map.old_count(),
                id_map.new_count(),
                old_graph.node_count(),
                new_graph.node_count()
            )));
        }
        id_map.validate()?;
        if source_old as usize >= old_graph.node_count() {
            return Err(invalid(format!("source {source_old} not in old graph")));
        }
        let source_new = id_map.to_new(source_old).ok_or_else(|| {
            Error::Unsupported(format!("source {source_old} is deleted by the batch"))
        })?;
        if prior_pi.len() != old_graph.node_count() || prior_r.len() != old_graph.node_count() {
            return Err(invalid("prior vectors do not match the old graph"));
        }
        let exact = residual_of(old_graph, source_old, prior_pi, cfg.alpha);
        let gap = exact.max_abs_distance(prior_r);
        if gap > PRIOR_RESIDUAL_TOLERANCE {
            return Err(invalid(format!(
                "prior residual differs from the exact residual by {gap:e}"
            )));
        }
        Ok(UpdateProblem {
            old_graph,
            new_graph,
            id_map,
            source_old,
            source_new,
            prior_pi,
            prior_r,
            cfg,
            exact_deletion_correction: false,
            row_delta: None,
        })
    }

    pub fn with_exact_deletion_correction(mut self, on: bool) -> Self {
        self.exact_deletion_correction = on;
        self
    }

    /// Reuses a row diff computed once for the batch.
    pub fn with_row_delta(mut self, delta: &'a RowDelta) -> Self {
        self.row_delta = Some(delta);
        self
    }

    pub fn with_config(mut self, cfg: SolverConfig) -> Self {
        self.cfg = cfg;
        self
    }

    /// Survivors (old IDs) whose effective row differs between the webs.
    pub fn changed_rows(&self) -> Vec<NodeId> {
        let (old, new, map) = (self.old_graph, self.new_graph, self.id_map);
        match self.row_delta {
            Some(d) => d.effective_changes(old, new, map, self.source_old, self.source_new),
            None => RowDelta::compute(old, new, map).effective_changes(
                old,
                new,
                map,
                self.source_old,
                self.source_new,
            ),
        }
    }
}

/// An updated solution plus the time spent preparing the push run.
#[derive(Clone, Debug)]
pub struct UpdateRun {
    pub solution: PprSolution,
    pub initializer_time_s: f64,
}

/// Link-only initializer: `pi0 = pi`, `r0 = r + alpha pi (P* - P)`.
pub fn tracking_init(p: &UpdateProblem<'_>) -> Result<(PprVector, ResidualVector)> {
    if p.id_map.has_node_changes() {
        return Err(Error::Precondition(
            "batch inserts or deletes nodes; use vw_init".into(),
        ));
    }
    let alpha = p.cfg.alpha;
    let pi0 = p.prior_pi.clone();
    let mut r0 = p.prior_r.clone();
    let r = r0.as_mut_slice();
    for i in p.changed_rows() {
        let x = pi0.get(i);
        if x == 0.0 {
            continue;
        }
        let before = out_neighbors_effective(p.old_graph, i, p.source_old);
        let w = alpha * x * before.weight();
        for t in before.targets() {
            r[t as usize] -= w;
        }
        let after = out_neighbors_effective(p.new_graph, i, p.source_new);
        let w = alpha * x * after.weight();
        for t in after.targets() {
            r[t as usize] += w;
        }
    }
    Ok((pi0, r0))
}

/// Virtual-web initializer for node and link changes.
pub fn vw_init(p: &UpdateProblem<'_>) -> Result<(PprVector, ResidualVector)> {
    let map = p.id_map;
    let alpha = p.cfg.alpha;
    let n_new = map.new_count();
    let mut pi0 = vec![0.0; n_new];
    let mut r0 = vec![0.0; n_new];
    for (u, nu) in map.survivors() {
        pi0[nu as usize] = p.prior_pi.get(u);
        r0[nu as usize] = p.prior_r.get(u);
    }

    for i in p.changed_rows() {
        let x = p.prior_pi.get(i);
        if x == 0.0 {
            continue;
        }
        // Old row restricted to survivors, keeping its old weights.
        let before = out_neighbors_effective(p.old_graph, i, p.source_old);
        let w = alpha * x * before.weight();
        for t in before.targets() {
            if let Some(nt) = map.to_new(t) {
                r0[nt as usize] -= w;
            }
        }
        // New row, including links into inserted nodes.
        let after = out_neighbors_effective(p.new_graph, map.to_new(i).expect("survivor"), p.source_new);
        let w = alpha * x * after.weight();
        for t in after.targets() {
            r0[t as usize] += w;
        }
    }

    if p.exact_deletion_correction {
        for &u in map.deleted() {
            let x = p.prior_pi.get(u);
            if x == 0.0 {
                continue;
            }
            let row = out_neighbors_effective(p.old_graph, u, p.source_old);
            let w = alpha * x * row.weight();
            for t in row.targets() {
                if let Some(nt) = map.to_new(t) {
                    r0[nt as usize] -= w;
                }
            }
        }
    }
    Ok((NodeScores::from_vec(pi0), NodeScores::from_vec(r0)))
}

/// Virtual-web initialization followed by forward push on the new graph.
/// Wall time covers both; pushes count only the solver.
pub fn vwppr_update(p: &UpdateProblem<'_>) -> Result<UpdateRun> {
    run_initialized(p, vw_init)
}

/// Link-only initialization followed by forward push on the new graph.
pub fn tracking_update(p: &UpdateProblem<'_>) -> Result<UpdateRun> {
    run_initialized(p, tracking_init)
}

fn run_initialized(
    p: &UpdateProblem<'_>,
    init: fn(&UpdateProblem<'_>) -> Result<(PprVector, ResidualVector)>,
) -> Result<UpdateRun> {
    let start = Instant::now();
    let (pi0, r0) = init(p)?;
    let initializer_time_s = start.elapsed().as_secs_f64();
    let mut solution = gauss_southwell(p.new_graph, p.source_new, pi0, r0, &p.cfg).map_err(|e| match e {
        Error::PushBudgetExceeded { budget, mut partial } => {
            partial.stats.wall_time_s += initializer_time_s;
            Error::PushBudgetExceeded { budget, partial }
        }
        other => other,
    })?;
    solution.stats.wall_time_s = start.elapsed().as_secs_f64();
    Ok(UpdateRun {
        solution,
        initializer_time_s,
    })
}

#[cfg(test)]
mod tests;
