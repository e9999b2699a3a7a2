//! Reference solvers and residual diagnostics.

use nalgebra::{DMatrix, DVector};

use super::{NodeScores, PprVector, ResidualVector};
use crate::error::{invalid, Error, Result};
use crate::graph::{effective_row, Adjacency, DanglingRule, EffectiveRow, NodeId};

/// Largest graph [`oracle_dense`] accepts.
pub const ORACLE_NODE_CAP: usize = 2000;

const POWER_ITERATION_CAP: usize = 1_000_000;

/// Exact residual `(1 - alpha) e_source - pi (I - alpha P)` over effective rows.
pub fn residual_of<G: Adjacency + ?Sized>(g: &G, source: NodeId, pi: &PprVector, alpha: f64) -> ResidualVector {
    residual_of_with(g, source, pi, alpha, DanglingRule::Source)
}

pub fn residual_of_with<G: Adjacency + ?Sized>(
    g: &G,
    source: NodeId,
    pi: &PprVector,
    alpha: f64,
    rule: DanglingRule,
) -> ResidualVector {
    let n = g.node_count();
    assert_eq!(pi.len(), n, "estimate does not match graph");
    let mut r = vec![0.0; n];
    r[source as usize] = 1.0 - alpha;
    let mut uniform_mass = 0.0;
    for (i, x) in pi.iter_nonzero() {
        r[i as usize] -= x;
        match effective_row(g, i, source, rule) {
            EffectiveRow::Uniform(_) => uniform_mass += x,
            row => {
                let share = alpha * x * row.weight();
                for j in row.targets() {
                    r[j as usize] += share;
                }
            }
        }
    }
    if uniform_mass != 0.0 {
        let share = alpha * uniform_mass / n as f64;
        r.iter_mut().for_each(|x| *x += share);
    }
    NodeScores::from_vec(r)
}

/// `||r||_1 / (1 - alpha)`, an upper bound on the l1 distance from the
/// estimate that produced `r` to the exact PPR vector.
pub fn l1_error_bound(r: &ResidualVector, alpha: f64) -> f64 {
    r.l1() / (1.0 - alpha)
}

/// Solves `pi (I - alpha P) = (1 - alpha) e_source` with a dense LU factorization.
pub fn oracle_dense<G: Adjacency + ?Sized>(g: &G, source: NodeId, alpha: f64) -> Result<PprVector> {
    oracle_dense_with(g, source, alpha, DanglingRule::Source, ORACLE_NODE_CAP)
}

pub fn oracle_dense_with<G: Adjacency + ?Sized>(
    g: &G,
    source: NodeId,
    alpha: f64,
    rule: DanglingRule,
    cap: usize,
) -> Result<PprVector> {
    let n = g.node_count();
    if n > cap {
        return Err(Error::OracleTooLarge { nodes: n, cap });
    }
    if source as usize >= n {
        return Err(invalid(format!("source {source} not in graph of {n} nodes")));
    }
    // Transposed system: (I - alpha P)^T pi^T = (1 - alpha) e_s.
    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..n as NodeId {
        let row = effective_row(g, i, source, rule);
        let w = alpha * row.weight();
        for j in row.targets() {
            m[(j as usize, i as usize)] -= w;
        }
    }
    let mut b = DVector::<f64>::zeros(n);
    b[source as usize] = 1.0 - alpha;
    let x = m
        .lu()
        .solve(&b)
        .ok_or_else(|| invalid("singular system (alpha out of range?)"))?;
    Ok(NodeScores::from_vec(x.iter().copied().collect()))
}

/// Power iteration `pi <- alpha pi P + (1 - alpha) mu` until the l1 change
/// drops below `tol`. `mu` is `e_source` with the source-restart dangling
/// rule, or uniform with the uniform dangling rule when `uniform` is set.
pub fn power_iteration<G: Adjacency + ?Sized>(
    g: &G,
    source: NodeId,
    alpha: f64,
    tol: f64,
    uniform: bool,
) -> Result<PprVector> {
    power_iteration_with(g, source, alpha, tol, uniform, POWER_ITERATION_CAP)
}

pub fn power_iteration_with<G: Adjacency + ?Sized>(
    g: &G,
    source: NodeId,
    alpha: f64,
    tol: f64,
    uniform: bool,
    max_iterations: usize,
) -> Result<PprVector> {
    let n = g.node_count();
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if !uniform && source as usize >= n {
        return Err(invalid(format!("source {source} not in graph of {n} nodes")));
    }
    if n == 0 {
        return Ok(NodeScores::zeros(0));
    }
    let rule = if uniform {
        DanglingRule::Uniform
    } else {
        DanglingRule::Source
    };
    let mut mu = vec![0.0; n];
    if uniform {
        mu.fill(1.0 / n as f64);
    } else {
        mu[source as usize] = 1.0;
    }
    let mut x = mu.clone();
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..max_iterations {
        next.iter_mut()
            .zip(&mu)
            .for_each(|(y, m)| *y = (1.0 - alpha) * m);
        let mut uniform_mass = 0.0;
        for i in 0..n as NodeId {
            let xi = x[i as usize];
            if xi == 0.0 {
                continue;
            }
            match effective_row(g, i, source, rule) {
                EffectiveRow::Uniform(_) => uniform_mass += xi,
                row => {
                    let share = alpha * xi * row.weight();
                    for j in row.targets() {
                        next[j as usize] += share;
                    }
                }
            }
        }
        if uniform_mass != 0.0 {
            let share = alpha * uniform_mass / n as f64;
            next.iter_mut().for_each(|y| *y += share);
        }
        change = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if change < tol {
            return Ok(NodeScores::from_vec(x));
        }
    }
    Err(Error::IterationCap {
        cap: max_iterations,
        last_change: change,
    })
}
