use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;

use vwppr::graph::{load_edge_list_path, write_binary, write_edge_list, LoadOptions};
use vwppr::harness::{
    self, calibrate_epsilon, format_table, parse_methods, read_csv, summarize, verify_suite, CalibrationOptions,
    Experiment, ExperimentReport, ExperimentSpec, Method, Scale,
};
use vwppr::perturb::{make_evolution, write_batch, PerturbPlan};
use vwppr::solver::Selection;
use vwppr::synth::social_digraph;
use vwppr::{Error, Result};

#[derive(Parser)]
#[command(name = "vwppr", version, about = "Dynamic personalized PageRank experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an edge list and report node and edge counts.
    Ingest {
        #[arg(long)]
        dataset: PathBuf,
        /// Relabel IDs to 0..k.
        #[arg(long)]
        compact: bool,
        /// Also write a binary adjacency cache.
        #[arg(long)]
        binary: Option<PathBuf>,
    },
    /// Write a synthetic social-network-like edge list.
    Synth {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 10.0)]
        mean_degree: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate an evolution: original and updated edge lists plus the batch.
    Gen {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute priors on the original web and fill the prior cache.
    Prior {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        cache: PathBuf,
    },
    /// Run the update methods and write per-source rows.
    Update {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// CSV destination; the JSON summary is written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        prior_cache: Option<PathBuf>,
    },
    /// Adjust a method's threshold until its mean error matches a reference.
    Calibrate {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value = "vwppr")]
        target: Method,
        #[arg(long, default_value = "per_edge")]
        reference: Method,
        #[arg(long, default_value_t = 1e-9)]
        reference_eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        prior_cache: Option<PathBuf>,
    },
    /// Run the invariant suite on seeded random graphs.
    Verify {
        #[arg(long, default_value = "small")]
        scale: Scale,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate a rows CSV into per-method means.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct PlanArgs {
    /// JSON plan file; overrides the individual plan flags.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    insert_nodes: usize,
    #[arg(long, default_value_t = 0)]
    delete_nodes: usize,
    #[arg(long, default_value_t = 0.0)]
    insert_edge_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    delete_edge_fraction: f64,
    #[arg(long, default_value_t = 0)]
    plan_seed: u64,
}

impl PlanArgs {
    fn resolve(&self) -> Result<PerturbPlan> {
        match &self.plan {
            Some(p) => PerturbPlan::from_json(&fs::read_to_string(p)?),
            None => Ok(PerturbPlan {
                insert_nodes: self.insert_nodes,
                delete_nodes: self.delete_nodes,
                insert_edge_fraction: self.insert_edge_fraction,
                delete_edge_fraction: self.delete_edge_fraction,
                rng_seed: self.plan_seed,
            }),
        }
    }
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long, default_value_t = 0.85)]
    alpha: f64,
    /// Threshold for every method without an --eps-for entry.
    #[arg(long, default_value_t = 1e-9)]
    eps: f64,
    /// Per-method threshold, as method=value. Repeatable.
    #[arg(long = "eps-for", value_parser = parse_method_eps)]
    eps_for: Vec<(Method, f64)>,
    #[arg(long, default_value_t = 1e-10)]
    benchmark_eps: f64,
    #[arg(long, default_value_t = 100)]
    sources: usize,
    /// Seed for source sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of vwppr, vwppr_exact, per_edge, tracking_only, from_scratch.
    #[arg(long, default_value = "vwppr,per_edge")]
    methods: String,
    /// Run vwppr with the deletion correction (reported as vwppr_exact).
    #[arg(long)]
    exact_correction: bool,
    #[arg(long, default_value = "queue")]
    selection: Selection,
    #[arg(long)]
    max_pushes: Option<u64>,
}

fn parse_method_eps(s: &str) -> std::result::Result<(Method, f64), String> {
    let (m, e) = s.split_once('=').ok_or("expected method=epsilon")?;
    let m: Method = m.parse().map_err(|e: Error| e.to_string())?;
    let e: f64 = e.parse().map_err(|_| format!("bad epsilon {e:?}"))?;
    Ok((m, e))
}

impl ExperimentArgs {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut methods = parse_methods(&self.methods)?;
        if self.exact_correction {
            for m in methods.iter_mut().filter(|m| **m == Method::Vwppr) {
                *m = Method::VwpprExact;
            }
            methods.dedup();
        }
        let mut spec = ExperimentSpec::new(&self.dataset, self.plan.resolve()?);
        spec.methods = methods;
        spec.alpha = self.alpha;
        spec.default_epsilon = self.eps;
        spec.epsilons = self.eps_for.iter().copied().collect();
        if self.exact_correction {
            if let Some(e) = spec.epsilons.remove(&Method::Vwppr) {
                spec.epsilons.entry(Method::VwpprExact).or_insert(e);
            }
        }
        spec.benchmark_epsilon = self.benchmark_eps;
        spec.source_count = self.sources;
        spec.rng_seed = self.seed;
        spec.selection = self.selection;
        spec.max_pushes = self.max_pushes;
        spec.validate()?;
        Ok(spec)
    }
}

fn write_json(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Ingest { dataset, compact, binary } => {
            let opts = LoadOptions {
                compact_ids: compact,
                ..LoadOptions::default()
            };
            let (g, stats) = load_edge_list_path(&dataset, opts)?;
            println!("{}", serde_json::to_string_pretty(&stats)?);
            if let Some(path) = binary {
                write_binary(&g, path)?;
            }
        }
        Command::Synth {
            nodes,
            mean_degree,
            seed,
            out,
        } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = social_digraph(nodes, mean_degree, &mut rng);
            write_edge_list(&g, BufWriter::new(File::create(&out)?))?;
            eprintln!("wrote {} nodes, {} edges to {}", g.node_count(), g.edge_count(), out.display());
        }
        Command::Gen { dataset, plan, out } => {
            let plan = plan.resolve()?;
            let (full, _) = harness::load_dataset(&dataset)?;
            let ev = make_evolution(&full, &plan)?;
            fs::create_dir_all(&out)?;
            write_edge_list(&ev.original, BufWriter::new(File::create(out.join("original.txt"))?))?;
            write_edge_list(&ev.updated, BufWriter::new(File::create(out.join("updated.txt"))?))?;
            write_batch(&ev.batch, BufWriter::new(File::create(out.join("batch.txt"))?))?;
            fs::write(out.join("plan.json"), plan.to_json())?;
            let ids = |v: &[u32]| v.iter().map(|x| format!("{x}\n")).collect::<String>();
            fs::write(out.join("original_ids.txt"), ids(&ev.original_ids))?;
            fs::write(out.join("updated_ids.txt"), ids(&ev.updated_ids))?;
            let info = serde_json::json!({
                "rng_algorithm": vwppr::perturb::RNG_ALGORITHM,
                "original_nodes": ev.original.node_count(),
                "original_edges": ev.original.edge_count(),
                "updated_nodes": ev.updated.node_count(),
                "updated_edges": ev.updated.edge_count(),
                "inserted_nodes": ev.batch.inserted_nodes.len(),
                "deleted_nodes": ev.batch.deleted_nodes.len(),
                "inserted_edges": ev.batch.inserted_edges.len(),
                "deleted_edges": ev.batch.deleted_edges.len(),
                "withheld_edges_discarded": ev.withheld_discarded.len(),
                "warnings": ev.warnings,
            });
            println!("{}", serde_json::to_string_pretty(&info)?);
        }
        Command::Prior { exp, cache } => {
            let mut spec = exp.spec()?;
            spec.prior_cache = Some(cache.clone());
            let experiment = Experiment::prepare(spec)?;
            let mut eps: Vec<f64> = experiment
                .spec
                .methods
                .iter()
                .filter(|&&m| m != Method::FromScratch)
                .map(|&m| experiment.spec.epsilon(m))
                .collect();
            eps.sort_by(f64::total_cmp);
            eps.dedup();
            for e in eps {
                experiment.priors(e)?;
                eprintln!("cached {} priors at eps {e:e} in {}", experiment.sources.len(), cache.display());
            }
        }
        Command::Update { exp, out, prior_cache } => {
            let mut spec = exp.spec()?;
            spec.prior_cache = prior_cache;
            let experiment = Experiment::prepare(spec)?;
            let rows = experiment.run()?;
            let report = ExperimentReport {
                summary: experiment.summary(&rows),
                rows,
            };
            report.write(&out)?;
            print!("{}", format_table(&report.summary.methods));
        }
        Command::Calibrate {
            exp,
            target,
            reference,
            reference_eps,
            out,
            prior_cache,
        } => {
            let mut spec = exp.spec()?;
            spec.prior_cache = prior_cache;
            let experiment = Experiment::prepare(spec)?;
            match calibrate_epsilon(&experiment, target, reference, reference_eps, CalibrationOptions::default()) {
                Ok(cal) => {
                    let text = serde_json::to_string_pretty(&cal)?;
                    println!("{text}");
                    if let Some(out) = out {
                        write_json(&out, &text)?;
                    }
                }
                Err(Error::CalibrationFailed { message, trace }) => {
                    eprintln!("calibration failed: {message}");
                    for (e, err) in trace {
                        eprintln!("  eps {e:e} -> mean l1 {err:e}");
                    }
                    return Ok(false);
                }
                Err(e) => return Err(e),
            }
        }
        Command::Verify { scale, seed, out } => {
            let checks = verify_suite(scale, seed);
            for c in &checks {
                println!("{c}");
            }
            if let Some(out) = out {
                write_json(&out, &serde_json::to_string_pretty(&checks)?)?;
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::Report { input, out } => {
            let rows = read_csv(File::open(&input)?)?;
            let summary = summarize(&rows);
            print!("{}", format_table(&summary));
            if let Some(out) = out {
                write_json(&out, &serde_json::to_string_pretty(&summary)?)?;
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
