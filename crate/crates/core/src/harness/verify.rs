//! Seeded invariant checks of the solver and the update initializers.
//!
//! Every check reports the worst value of its checked quantity next to the
//! limit that quantity must not exceed.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamic::{per_edge_baseline, tracking_init, vw_init, vwppr_update, UpdateProblem};
use crate::error::{invalid, Error, Result};
use crate::graph::{apply_batch, DanglingRule, Graph, IdMap, NodeId, PerturbationBatch};
use crate::perturb::{make_evolution, PerturbPlan};
use crate::solver::{
    gauss_southwell_observed, l1_error_bound, oracle_dense, power_iteration, ppr_from_scratch, residual_of,
    NodeScores, PprSolution, PprVector, SolverConfig,
};
use crate::synth::{random_batch, random_digraph, BatchShape};

/// Absolute allowance for rounding when comparing an error with its bound.
pub const BOUND_ROUNDING: f64 = 1e-12;

const ALPHA: f64 = 0.85;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub limit: f64,
    pub detail: String,
    pub elapsed_s: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, worst {:.3e} (limit {:.1e}), {:.2}s. {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.limit,
            self.elapsed_s,
            self.detail
        )
    }
}

struct Tally {
    name: &'static str,
    start: Instant,
    cases: usize,
    worst: f64,
    limit: f64,
    failures: usize,
    detail: String,
}

impl Tally {
    fn new(name: &'static str, limit: f64) -> Tally {
        Tally {
            name,
            start: Instant::now(),
            cases: 0,
            worst: f64::NEG_INFINITY,
            limit,
            failures: 0,
            detail: String::new(),
        }
    }

    fn observe(&mut self, value: f64) {
        self.cases += 1;
        if value.is_nan() || value > self.worst {
            self.worst = value;
        }
        if !(value <= self.limit) {
            self.failures += 1;
        }
    }

    fn finish(self, extra: impl Into<String>) -> Check {
        let extra = extra.into();
        let detail = match (self.failures, extra.is_empty()) {
            (0, _) => extra,
            (k, true) => format!("{k} violations"),
            (k, false) => format!("{k} violations; {extra}"),
        };
        Check {
            name: self.name.to_string(),
            passed: self.failures == 0 && self.cases > 0 && self.detail.is_empty(),
            cases: self.cases,
            worst: self.worst,
            limit: self.limit,
            detail: if self.detail.is_empty() { detail } else { format!("{}; {detail}", self.detail) },
            elapsed_s: self.start.elapsed().as_secs_f64(),
        }
    }

    fn error(&mut self, e: &Error) {
        self.failures += 1;
        if self.detail.is_empty() {
            self.detail = format!("error: {e}");
        }
    }
}

/// Seeded corpus of random digraphs with a source each.
#[derive(Clone, Copy, Debug)]
pub struct Corpus {
    pub seed: u64,
    pub graphs: usize,
    pub max_nodes: usize,
    pub max_mean_degree: f64,
}

impl Corpus {
    pub fn instances(&self) -> Vec<(Graph, NodeId)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.graphs)
            .map(|_| {
                let n = rng.gen_range(2..=self.max_nodes);
                let deg = rng.gen_range(1.0..=self.max_mean_degree);
                let g = random_digraph(n, deg, 0.1, &mut rng);
                let s = rng.gen_range(0..n as NodeId);
                (g, s)
            })
            .collect()
    }
}

fn cfg(eps: f64) -> SolverConfig {
    SolverConfig::new(ALPHA, eps).expect("valid config")
}

/// Residual identity along the run: every `every` pushes and at convergence,
/// the tracked residual equals the residual recomputed from the estimate.
pub fn residual_identity(corpus: &Corpus, eps: f64, every: u64, tol: f64) -> Check {
    let mut t = Tally::new("residual identity during push", tol);
    for (g, s) in corpus.instances() {
        let mut gap = 0.0f64;
        let n = g.node_count();
        let observed = gauss_southwell_observed(
            &g,
            s,
            NodeScores::zeros(n),
            NodeScores::unit(n, s, 1.0 - ALPHA),
            &cfg(eps),
            |ev| {
                if ev.step % every == 0 {
                    let pi = NodeScores::from_vec(ev.pi.to_vec());
                    let exact = residual_of(&g, s, &pi, ALPHA);
                    gap = gap.max(exact.max_abs_distance(&NodeScores::from_vec(ev.r.to_vec())));
                }
            },
        );
        match observed {
            Ok(sol) => {
                gap = gap.max(residual_of(&g, s, &sol.pi, ALPHA).max_abs_distance(&sol.r));
                t.observe(gap);
            }
            Err(e) => t.error(&e),
        }
    }
    t.finish(format!("eps {eps:e}, checked every {every} pushes"))
}

/// Converged estimates lie within `||r||_1 / (1 - alpha)` of the dense solve.
/// The checked quantity is `error - bound`.
pub fn error_bound(corpus: &Corpus, eps: f64) -> Check {
    let mut t = Tally::new("l1 error bound", BOUND_ROUNDING);
    for (g, s) in corpus.instances() {
        match ppr_from_scratch(&g, s, &cfg(eps)).and_then(|sol| Ok((oracle_dense(&g, s, ALPHA)?, sol))) {
            Ok((exact, sol)) => t.observe(sol.pi.l1_distance(&exact) - l1_error_bound(&sol.r, ALPHA)),
            Err(e) => t.error(&e),
        }
    }
    t.finish(format!("eps {eps:e}"))
}

/// Push never touches nodes unreachable from the source, whose estimate and
/// residual stay exactly zero. Counts offending nodes per case.
pub fn locality(corpus: &Corpus, eps: f64, sources_per_graph: usize) -> Check {
    let mut t = Tally::new("push locality", 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(corpus.seed ^ 0x10ca1);
    // The corpus plus a sparse variant, where unreachable sets are common.
    let sparse = Corpus {
        seed: corpus.seed.wrapping_add(1),
        max_mean_degree: 1.5,
        ..*corpus
    };
    for (g, _) in corpus.instances().into_iter().chain(sparse.instances()) {
        let n = g.node_count();
        let mut candidates: Vec<NodeId> = g.nodes().collect();
        rand::seq::SliceRandom::shuffle(candidates.as_mut_slice(), &mut rng);
        let mut used = 0;
        for s in candidates {
            if used == sources_per_graph {
                break;
            }
            let reach = g.reachable_from(s);
            if reach.iter().all(|&x| x) {
                continue;
            }
            used += 1;
            let mut outside = 0usize;
            let run = gauss_southwell_observed(
                &g,
                s,
                NodeScores::zeros(n),
                NodeScores::unit(n, s, 1.0 - ALPHA),
                &cfg(eps),
                |ev| {
                    if !reach[ev.node as usize] {
                        outside += 1;
                    }
                },
            );
            match run {
                Ok(sol) => {
                    outside += (0..n)
                        .filter(|&i| !reach[i] && (sol.pi.get(i as NodeId) != 0.0 || sol.r.get(i as NodeId) != 0.0))
                        .count();
                    t.observe(outside as f64);
                }
                Err(e) => t.error(&e),
            }
        }
    }
    t.finish(format!("eps {eps:e}, sources with a nonempty unreachable set"))
}

/// With the uniform dangling rule, the mean of all single-source vectors is
/// the global PageRank. Checked quantity: `distance - (n eps / (1 - alpha) + 10 tol)`.
pub fn pagerank_average(corpus: &Corpus, eps: f64, tol: f64) -> Check {
    let mut t = Tally::new("mean of single-source vectors equals PageRank", 0.0);
    let c = SolverConfig {
        dangling: DanglingRule::Uniform,
        ..cfg(eps)
    };
    for (g, _) in corpus.instances() {
        let n = g.node_count();
        let run = || -> Result<f64> {
            let mut mean = vec![0.0; n];
            for s in g.nodes() {
                let sol = ppr_from_scratch(&g, s, &c)?;
                mean.iter_mut().zip(sol.pi.as_slice()).for_each(|(m, x)| *m += x / n as f64);
            }
            let global = power_iteration(&g, 0, ALPHA, tol, true)?;
            let dist = NodeScores::from_vec(mean).l1_distance(&global);
            Ok(dist - (n as f64 * eps / (1.0 - ALPHA) + 10.0 * tol))
        };
        match run() {
            Ok(v) => t.observe(v),
            Err(e) => t.error(&e),
        }
    }
    t.finish(format!("eps {eps:e}, power-iteration tol {tol:e}"))
}

/// A random link-only batch with between 1 and `max_flips` flipped pairs.
pub fn random_flips<R: Rng>(g: &Graph, max_flips: usize, rng: &mut R) -> PerturbationBatch {
    let n = g.node_count() as NodeId;
    let target = rng.gen_range(1..=max_flips);
    let mut seen = BTreeSet::new();
    let mut b = PerturbationBatch::default();
    let mut attempts = 0;
    while seen.len() < target && attempts < 20 * target {
        attempts += 1;
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if !seen.insert((u, v)) {
            continue;
        }
        if g.has_edge(u, v) {
            b.deleted_edges.insert((u, v));
        } else {
            b.inserted_edges.insert((u, v));
        }
    }
    b
}

/// After link-only initialization the carried residual is the exact
/// residual of the carried estimate on the new graph.
pub fn tracking_exactness(corpus: &Corpus, max_flips: usize, tol: f64) -> Check {
    let mut t = Tally::new("link-only initialization is exact", tol);
    let mut rng = ChaCha8Rng::seed_from_u64(corpus.seed ^ 0x7aac);
    for (g, s) in corpus.instances() {
        let b = random_flips(&g, max_flips, &mut rng);
        let run = || -> Result<f64> {
            let (h, map) = apply_batch(&g, &b)?;
            let prior = ppr_from_scratch(&g, s, &cfg(1e-7))?;
            let p = UpdateProblem::new(&g, &h, &map, s, &prior.pi, &prior.r, cfg(1e-7))?;
            let (pi0, r0) = tracking_init(&p)?;
            Ok(residual_of(&h, s, &pi0, ALPHA).max_abs_distance(&r0))
        };
        match run() {
            Ok(v) => t.observe(v),
            Err(e) => t.error(&e),
        }
    }
    t.finish(format!("1..={max_flips} flips per batch"))
}

/// `-alpha x_d P_{d,0}` on the new graph, built edge by edge from the old graph.
pub fn deletion_term(old: &Graph, map: &IdMap, source: NodeId, pi: &PprVector, alpha: f64) -> Vec<f64> {
    let mut term = vec![0.0; map.new_count()];
    for &u in map.deleted() {
        let targets: Vec<NodeId> = if old.out_links(u).is_empty() {
            vec![source]
        } else {
            old.out_links(u).to_vec()
        };
        let p = 1.0 / targets.len() as f64;
        for t in targets {
            if let Some(nt) = map.to_new(t) {
                term[nt as usize] -= alpha * pi.get(u) * p;
            }
        }
    }
    term
}

/// The published virtual-web residual misses exactly the deletion term; the
/// corrected one is exact. Two checks over the same batches.
pub fn vw_discrepancy(corpus: &Corpus, tol: f64) -> (Check, Check) {
    let mut plain = Tally::new("virtual-web residual discrepancy equals deletion term", tol);
    let mut exact = Tally::new("corrected virtual-web residual is exact", tol);
    let mut rng = ChaCha8Rng::seed_from_u64(corpus.seed ^ 0x0d15c);
    for (g, s) in corpus.instances() {
        let mut b = random_batch(&g, &BatchShape::default(), Some(s), &mut rng);
        while !b.has_node_changes() {
            b = random_batch(&g, &BatchShape::default(), Some(s), &mut rng);
        }
        let run = || -> Result<(f64, f64)> {
            let (h, map) = apply_batch(&g, &b)?;
            let prior = ppr_from_scratch(&g, s, &cfg(1e-7))?;
            let p = UpdateProblem::new(&g, &h, &map, s, &prior.pi, &prior.r, cfg(1e-7))?;
            let sn = p.source_new;
            let (pi0, r0) = vw_init(&p)?;
            let term = deletion_term(&g, &map, s, &prior.pi, ALPHA);
            let got = residual_of(&h, sn, &pi0, ALPHA);
            let gap_plain = (0..h.node_count())
                .map(|i| (got.get(i as NodeId) - r0.get(i as NodeId) - term[i]).abs())
                .fold(0.0, f64::max);
            let (pi1, r1) = vw_init(&p.clone().with_exact_deletion_correction(true))?;
            let gap_exact = residual_of(&h, sn, &pi1, ALPHA).max_abs_distance(&r1);
            Ok((gap_plain, gap_exact))
        };
        match run() {
            Ok((a, b)) => {
                plain.observe(a);
                exact.observe(b);
            }
            Err(e) => {
                plain.error(&e);
                exact.error(&e);
            }
        }
    }
    (plain.finish("node and link batches"), exact.finish("node and link batches"))
}

/// Updated estimates against the dense solve on random evolutions. The
/// checked quantity is `error - bound`, where the bound of the uncorrected
/// virtual-web method includes `alpha ||x_d||_1 / (1 - alpha)`.
pub fn end_to_end(evolutions: usize, max_nodes: usize, seed: u64, eps: f64) -> Check {
    let mut t = Tally::new("updates land within their bounds of the dense solve", BOUND_ROUNDING);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut attempts = 0;
    while done < evolutions && attempts < 20 * evolutions {
        attempts += 1;
        let n = rng.gen_range(20..=max_nodes);
        let g = random_digraph(n, rng.gen_range(1.5..6.0), 0.1, &mut rng);
        let plan = PerturbPlan {
            insert_nodes: rng.gen_range(1..=(n / 10).max(1)),
            delete_nodes: rng.gen_range(1..=(n / 10).max(1)),
            insert_edge_fraction: rng.gen_range(0.0..0.05),
            delete_edge_fraction: rng.gen_range(0.0..0.05),
            rng_seed: rng.gen(),
        };
        let Ok(ev) = make_evolution(&g, &plan) else {
            continue;
        };
        let survivors: Vec<NodeId> = ev.id_map.survivors().map(|(o, _)| o).collect();
        if survivors.is_empty() {
            continue;
        }
        done += 1;
        let s = survivors[rng.gen_range(0..survivors.len())];
        let run = || -> Result<Vec<f64>> {
            let c = cfg(eps);
            let prior = ppr_from_scratch(&ev.original, s, &c)?;
            let p = UpdateProblem::new(&ev.original, &ev.updated, &ev.id_map, s, &prior.pi, &prior.r, c)?;
            let exact = oracle_dense(&ev.updated, p.source_new, ALPHA)?;
            let margin = |sol: &PprSolution, slack: f64| {
                sol.pi.l1_distance(&exact) - l1_error_bound(&sol.r, ALPHA) - slack
            };
            let xd: f64 = ev.id_map.deleted().iter().map(|&u| prior.pi.get(u)).sum();
            let corrected = vwppr_update(&p.clone().with_exact_deletion_correction(true))?.solution;
            let plain = vwppr_update(&p)?.solution;
            let baseline = per_edge_baseline(&p)?.solution;
            let scratch = ppr_from_scratch(&ev.updated, p.source_new, &c)?;
            Ok(vec![
                margin(&corrected, 0.0),
                margin(&baseline, 0.0),
                margin(&scratch, 0.0),
                margin(&plain, ALPHA * xd / (1.0 - ALPHA)),
            ])
        };
        match run() {
            Ok(v) => t.observe(v.into_iter().fold(f64::NEG_INFINITY, f64::max)),
            Err(e) => t.error(&e),
        }
    }
    if done < evolutions {
        t.detail = format!("only {done} of {evolutions} evolutions generated");
    }
    t.finish(format!("eps {eps:e}, four methods per evolution"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    /// n <= 200, 50 seeds.
    Small,
    /// n <= 1000, 100 seeds.
    Medium,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scale> {
        match s {
            "small" => Ok(Scale::Small),
            "medium" => Ok(Scale::Medium),
            other => Err(invalid(format!("unknown scale {other:?}"))),
        }
    }
}

pub fn verify_suite(scale: Scale, seed: u64) -> Vec<Check> {
    let (graphs, max_nodes) = match scale {
        Scale::Small => (50, 200),
        Scale::Medium => (100, 1000),
    };
    let corpus = Corpus {
        seed,
        graphs,
        max_nodes,
        max_mean_degree: 8.0,
    };
    let small = Corpus {
        graphs: graphs.min(20),
        max_nodes: 200,
        ..corpus
    };
    let (plain, exact) = vw_discrepancy(&corpus, 1e-12);
    vec![
        residual_identity(&corpus, 1e-9, 100, 1e-12),
        error_bound(&corpus, 1e-6),
        locality(&corpus, 1e-9, 5),
        pagerank_average(&small, 1e-9, 1e-12),
        tracking_exactness(&corpus, 50, 1e-12),
        plain,
        exact,
        end_to_end(graphs, max_nodes, seed ^ 0xe2e, 1e-7),
    ]
}
