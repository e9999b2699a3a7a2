//! Experiment orchestration: evolution, priors, per-source method runs,
//! benchmark comparison and report files.

mod cache;
mod calibrate;
mod report;
pub mod verify;

pub use cache::{graph_fingerprint, PriorCache};
pub use calibrate::{calibrate_epsilon, Calibration, CalibrationOptions};
pub use report::{format_table, read_csv, summarize, write_csv, MethodSummary, ReportRow, RowStatus, Summary};
pub use verify::{verify_suite, Check, Scale};

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamic::{
    per_edge_baseline_planned, tracking_update, vwppr_update, EdgeMutationPlan, UpdateProblem, UpdateRun,
};
use crate::error::{invalid, Error, Result};
use crate::graph::{load_edge_list_path, read_binary, Graph, LoadOptions, LoadStats, NodeId, RowDelta};
use crate::perturb::{make_evolution, Evolution, PerturbPlan};
use crate::solver::{ppr_from_scratch, PprSolution, PprVector, Selection, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Virtual-web initialization as published, then push.
    Vwppr,
    /// Virtual-web initialization with the deletion correction, then push.
    VwpprExact,
    /// Sequential single-link replay with push after every change.
    PerEdge,
    /// Link-only initialization, then push. Batches with node changes are unsupported.
    TrackingOnly,
    /// Push from scratch on the updated web.
    FromScratch,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Vwppr,
        Method::VwpprExact,
        Method::PerEdge,
        Method::TrackingOnly,
        Method::FromScratch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vwppr => "vwppr",
            Method::VwpprExact => "vwppr_exact",
            Method::PerEdge => "per_edge",
            Method::TrackingOnly => "tracking_only",
            Method::FromScratch => "from_scratch",
        }
    }

    fn needs_prior(self) -> bool {
        self != Method::FromScratch
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| invalid(format!("unknown method {s:?}")))
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(s: &str) -> Result<Vec<Method>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Edge-list file, or a binary adjacency cache ending in `.csr`.
    pub dataset: PathBuf,
    pub plan: PerturbPlan,
    pub source_count: usize,
    pub methods: Vec<Method>,
    /// Per-method thresholds; methods not listed use `default_epsilon`.
    pub epsilons: BTreeMap<Method, f64>,
    pub default_epsilon: f64,
    pub alpha: f64,
    pub benchmark_epsilon: f64,
    pub selection: Selection,
    pub max_pushes: Option<u64>,
    /// Seed for source sampling. The plan carries its own seed.
    pub rng_seed: u64,
    /// CSV destination; the JSON summary goes next to it.
    pub output: Option<PathBuf>,
    pub prior_cache: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(dataset: impl Into<PathBuf>, plan: PerturbPlan) -> ExperimentSpec {
        ExperimentSpec {
            dataset: dataset.into(),
            plan,
            source_count: 100,
            methods: vec![Method::Vwppr, Method::PerEdge],
            epsilons: BTreeMap::new(),
            default_epsilon: 1e-9,
            alpha: 0.85,
            benchmark_epsilon: 1e-10,
            selection: Selection::Queue,
            max_pushes: None,
            rng_seed: 0,
            output: None,
            prior_cache: None,
        }
    }

    pub fn epsilon(&self, m: Method) -> f64 {
        self.epsilons.get(&m).copied().unwrap_or(self.default_epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(invalid("no methods requested"));
        }
        if self.source_count == 0 {
            return Err(invalid("source count must be at least 1"));
        }
        let eps = self.epsilons.values().chain([&self.default_epsilon, &self.benchmark_epsilon]);
        for &e in eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(format!("epsilon must be positive, got {e}")));
            }
        }
        self.solver_config(self.default_epsilon).validate()
    }

    pub fn solver_config(&self, epsilon: f64) -> SolverConfig {
        SolverConfig {
            alpha: self.alpha,
            epsilon,
            max_pushes: self.max_pushes,
            selection: self.selection,
            ..SolverConfig::default()
        }
    }

    /// Short dataset label: the file stem.
    pub fn dataset_id(&self) -> String {
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dataset.display().to_string())
    }
}

/// Loads an edge list, or a binary adjacency cache when the path ends in `.csr`.
pub fn load_dataset(path: &Path) -> Result<(Graph, Option<LoadStats>)> {
    if path.extension().is_some_and(|e| e == "csr") {
        Ok((read_binary(path)?, None))
    } else {
        let (g, stats) = load_edge_list_path(path, LoadOptions::default())?;
        Ok((g, Some(stats)))
    }
}

/// A prepared experiment: the evolution, the sampled sources and their
/// benchmark vectors on the updated web.
#[derive(Debug)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub load_stats: Option<LoadStats>,
    pub evolution: Evolution,
    /// Sources as original-web IDs.
    pub sources: Vec<NodeId>,
    row_delta: RowDelta,
    mutation_plan: EdgeMutationPlan,
    benchmarks: Vec<PprSolution>,
    cache: PriorCache,
}

impl Experiment {
    pub fn prepare(spec: ExperimentSpec) -> Result<Experiment> {
        spec.validate()?;
        let (full, stats) = load_dataset(&spec.dataset)?;
        Experiment::from_graph(spec, &full, stats)
    }

    pub fn from_graph(spec: ExperimentSpec, full: &Graph, load_stats: Option<LoadStats>) -> Result<Experiment> {
        spec.validate()?;
        let evolution = make_evolution(full, &spec.plan)?;
        Experiment::from_evolution(spec, evolution, load_stats)
    }

    pub fn from_evolution(spec: ExperimentSpec, evolution: Evolution, load_stats: Option<LoadStats>) -> Result<Experiment> {
        spec.validate()?;
        let map = &evolution.id_map;
        let survivors: Vec<NodeId> = map.survivors().map(|(old, _)| old).collect();
        if survivors.is_empty() {
            return Err(invalid("no node survives the batch; cannot sample sources"));
        }
        if spec.source_count > survivors.len() {
            return Err(invalid(format!(
                "{} sources requested but only {} nodes survive",
                spec.source_count,
                survivors.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let sources: Vec<NodeId> = index::sample(&mut rng, survivors.len(), spec.source_count)
            .into_iter()
            .map(|i| survivors[i])
            .collect();

        let row_delta = RowDelta::compute(&evolution.original, &evolution.updated, map);
        let mutation_plan = EdgeMutationPlan::build(&evolution.original, &evolution.updated, map);
        let bench_cfg = spec.solver_config(spec.benchmark_epsilon);
        let benchmarks = sources
            .par_iter()
            .map(|&s| {
                let s_new = map.to_new(s).expect("survivor");
                ppr_from_scratch(&evolution.updated, s_new, &SolverConfig {
                    max_pushes: None,
                    ..bench_cfg
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cache = PriorCache::new(spec.prior_cache.clone(), &evolution.original);
        Ok(Experiment {
            spec,
            load_stats,
            evolution,
            sources,
            row_delta,
            mutation_plan,
            benchmarks,
            cache,
        })
    }

    pub fn benchmark(&self, source_index: usize) -> &PprVector {
        &self.benchmarks[source_index].pi
    }

    /// Converged priors on the original web at `epsilon`, one per source.
    pub fn priors(&self, epsilon: f64) -> Result<Vec<PprSolution>> {
        let cfg = SolverConfig {
            max_pushes: None,
            ..self.spec.solver_config(epsilon)
        };
        self.sources
            .par_iter()
            .map(|&s| self.cache.get_or_compute(&self.evolution.original, s, &cfg))
            .collect()
    }

    /// Runs `method` at `epsilon` for every source. Rows come back in source order.
    pub fn run_method(&self, method: Method, epsilon: f64) -> Result<Vec<ReportRow>> {
        let priors = if method.needs_prior() {
            Some(self.priors(epsilon)?)
        } else {
            None
        };
        Ok((0..self.sources.len())
            .into_par_iter()
            .map(|k| self.run_one(method, epsilon, priors.as_ref().map(|p| &p[k]), k))
            .collect())
    }

    /// All requested methods at their configured thresholds.
    pub fn run(&self) -> Result<Vec<ReportRow>> {
        let mut rows = Vec::new();
        for &m in &self.spec.methods {
            rows.extend(self.run_method(m, self.spec.epsilon(m))?);
        }
        Ok(rows)
    }

    fn run_one(&self, method: Method, epsilon: f64, prior: Option<&PprSolution>, k: usize) -> ReportRow {
        let ev = &self.evolution;
        let s_old = self.sources[k];
        let s_new = ev.id_map.to_new(s_old).expect("survivor");
        let cfg = self.spec.solver_config(epsilon);
        let alpha = cfg.alpha;
        let mut deletion_mass = 0.0;

        let outcome: Result<UpdateRun> = match (method, prior) {
            (Method::FromScratch, _) => ppr_from_scratch(&ev.updated, s_new, &cfg).map(|solution| UpdateRun {
                solution,
                initializer_time_s: 0.0,
            }),
            (_, Some(prior)) => {
                deletion_mass = ev.id_map.deleted().iter().map(|&u| prior.pi.get(u)).sum();
                UpdateProblem::new(&ev.original, &ev.updated, &ev.id_map, s_old, &prior.pi, &prior.r, cfg).and_then(
                    |p| {
                        let p = p.with_row_delta(&self.row_delta);
                        match method {
                            Method::Vwppr => vwppr_update(&p),
                            Method::VwpprExact => vwppr_update(&p.with_exact_deletion_correction(true)),
                            Method::PerEdge => per_edge_baseline_planned(&p, &self.mutation_plan),
                            Method::TrackingOnly => tracking_update(&p),
                            Method::FromScratch => unreachable!(),
                        }
                    },
                )
            }
            (_, None) => Err(invalid("prior missing")),
        };

        let mut row = ReportRow {
            dataset: self.spec.dataset_id(),
            method,
            source: ev.original_ids[s_old as usize],
            pushes: 0,
            wall_time_s: 0.0,
            l1_error: f64::NAN,
            initializer_time_s: 0.0,
            epsilon,
            residual_l1: f64::NAN,
            l1_bound: f64::NAN,
            status: RowStatus::Ok,
        };
        let (solution, init_time) = match outcome {
            Ok(run) => (run.solution, run.initializer_time_s),
            Err(Error::PushBudgetExceeded { partial, .. }) => {
                row.status = RowStatus::BudgetExceeded;
                (*partial, 0.0)
            }
            Err(Error::Precondition(_)) | Err(Error::Unsupported(_)) => {
                row.status = RowStatus::Unsupported;
                return row;
            }
            Err(e) => {
                log::error!("{method} on source {s_old}: {e}");
                row.status = RowStatus::Error;
                return row;
            }
        };
        let bench = &self.benchmarks[k];
        row.pushes = solution.stats.pushes;
        row.wall_time_s = solution.stats.wall_time_s;
        row.initializer_time_s = init_time;
        row.l1_error = solution.pi.l1_distance(&bench.pi);
        row.residual_l1 = solution.r.l1();
        let slack = if method == Method::Vwppr {
            alpha * deletion_mass / (1.0 - alpha)
        } else {
            0.0
        };
        row.l1_bound = (row.residual_l1 + bench.r.l1()) / (1.0 - alpha) + slack;
        row
    }

    pub fn summary(&self, rows: &[ReportRow]) -> Summary {
        let ev = &self.evolution;
        Summary {
            dataset: self.spec.dataset_id(),
            rng_algorithm: crate::perturb::RNG_ALGORITHM.to_string(),
            plan: self.spec.plan.clone(),
            source_seed: self.spec.rng_seed,
            sources: self.sources.len(),
            alpha: self.spec.alpha,
            benchmark_epsilon: self.spec.benchmark_epsilon,
            selection: self.spec.selection,
            load: self.load_stats.clone(),
            original_nodes: ev.original.node_count(),
            original_edges: ev.original.edge_count(),
            updated_nodes: ev.updated.node_count(),
            updated_edges: ev.updated.edge_count(),
            inserted_nodes: ev.batch.inserted_nodes.len(),
            deleted_nodes: ev.batch.deleted_nodes.len(),
            inserted_edges: ev.batch.inserted_edges.len(),
            deleted_edges: ev.batch.deleted_edges.len(),
            single_link_changes: self.mutation_plan.link_changes(),
            notes: vec![
                "edge deletions are drawn uniformly from the stream edges that were not withheld".into(),
                "per_edge is a sequential single-link replay with residual reuse, not LazyForwardUpdate".into(),
                "runtime_per_100_sources_s is the mean per-source wall time times 100".into(),
                "pushes count single-node push operations".into(),
            ],
            methods: summarize(rows),
        }
    }
}

/// Report of one experiment run.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub summary: Summary,
}

impl ExperimentReport {
    /// Writes the CSV to `path` and the JSON summary to `path` with a `.summary.json` suffix.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        write_csv(&self.rows, std::fs::File::create(path)?)?;
        std::fs::write(summary_path(path), self.summary.to_json())?;
        Ok(())
    }
}

pub fn summary_path(csv: &Path) -> PathBuf {
    let mut name = csv.file_stem().unwrap_or_default().to_os_string();
    name.push(".summary.json");
    csv.with_file_name(name)
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let exp = Experiment::prepare(spec.clone())?;
    let rows = exp.run()?;
    let report = ExperimentReport {
        summary: exp.summary(&rows),
        rows,
    };
    if let Some(out) = &spec.output {
        report.write(out)?;
    }
    Ok(report)
}
