use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{invalid, Result};
use crate::graph::{LoadStats, NodeId};
use crate::perturb::PerturbPlan;
use crate::solver::Selection;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    /// The push budget ran out; figures describe the partial state.
    BudgetExceeded,
    /// The method does not apply to this batch.
    Unsupported,
    Error,
}

/// One (method, source) measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: Method,
    /// Source node, by its dataset ID.
    pub source: NodeId,
    pub pushes: u64,
    pub wall_time_s: f64,
    /// l1 distance to the benchmark vector.
    pub l1_error: f64,
    pub initializer_time_s: f64,
    pub epsilon: f64,
    pub residual_l1: f64,
    /// Error bound against the benchmark: both residuals over `1 - alpha`,
    /// plus the deletion slack for the uncorrected virtual-web method.
    pub l1_bound: f64,
    pub status: RowStatus,
}

impl ReportRow {
    /// Equality ignoring the timing columns.
    pub fn same_measurement(&self, other: &ReportRow) -> bool {
        let (a, b) = (self, other);
        // Bitwise so that NaN placeholders compare equal.
        a.dataset == b.dataset
            && a.method == b.method
            && a.source == b.source
            && a.pushes == b.pushes
            && a.l1_error.to_bits() == b.l1_error.to_bits()
            && a.epsilon.to_bits() == b.epsilon.to_bits()
            && a.residual_l1.to_bits() == b.residual_l1.to_bits()
            && a.l1_bound.to_bits() == b.l1_bound.to_bits()
            && a.status == b.status
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row).map_err(|e| invalid(format!("csv write: {e}")))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| crate::Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Per-method means over rows with status `ok`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub epsilon: f64,
    pub rows: usize,
    pub ok: usize,
    pub mean_pushes: f64,
    pub mean_wall_time_s: f64,
    pub runtime_per_100_sources_s: f64,
    pub mean_l1_error: f64,
    pub max_l1_error: f64,
    pub mean_initializer_time_s: f64,
    /// Rows whose error exceeds their bound.
    pub bound_violations: usize,
}

pub fn summarize(rows: &[ReportRow]) -> Vec<MethodSummary> {
    let mut by_method: BTreeMap<Method, Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        by_method.entry(r.method).or_default().push(r);
    }
    by_method
        .into_iter()
        .map(|(method, all)| {
            let ok: Vec<&ReportRow> = all.iter().copied().filter(|r| r.status == RowStatus::Ok).collect();
            let mean = |f: fn(&ReportRow) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            let mean_wall = mean(|r| r.wall_time_s);
            MethodSummary {
                method,
                epsilon: all[0].epsilon,
                rows: all.len(),
                ok: ok.len(),
                mean_pushes: mean(|r| r.pushes as f64),
                mean_wall_time_s: mean_wall,
                runtime_per_100_sources_s: 100.0 * mean_wall,
                mean_l1_error: mean(|r| r.l1_error),
                max_l1_error: ok.iter().map(|r| r.l1_error).fold(f64::NAN, f64::max),
                mean_initializer_time_s: mean(|r| r.initializer_time_s),
                bound_violations: ok.iter().filter(|r| !(r.l1_error <= r.l1_bound)).count(),
            }
        })
        .collect()
}

/// JSON summary written next to the CSV.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub dataset: String,
    pub rng_algorithm: String,
    pub plan: PerturbPlan,
    pub source_seed: u64,
    pub sources: usize,
    pub alpha: f64,
    pub benchmark_epsilon: f64,
    pub selection: Selection,
    pub load: Option<LoadStats>,
    pub original_nodes: usize,
    pub original_edges: usize,
    pub updated_nodes: usize,
    pub updated_edges: usize,
    pub inserted_nodes: usize,
    pub deleted_nodes: usize,
    pub inserted_edges: usize,
    pub deleted_edges: usize,
    pub single_link_changes: usize,
    pub notes: Vec<String>,
    pub methods: Vec<MethodSummary>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Fixed-width table of per-method means.
pub fn format_table(summaries: &[MethodSummary]) -> String {
    let mut out = format!(
        "{:<14} {:>10} {:>7} {:>14} {:>12} {:>16} {:>12}\n",
        "method", "epsilon", "ok", "mean_pushes", "mean_l1", "s_per_100_src", "violations"
    );
    for s in summaries {
        out.push_str(&format!(
            "{:<14} {:>10.3e} {:>3}/{:<3} {:>14.1} {:>12.4e} {:>16.4} {:>12}\n",
            s.method.name(),
            s.epsilon,
            s.ok,
            s.rows,
            s.mean_pushes,
            s.mean_l1_error,
            s.runtime_per_100_sources_s,
            s.bound_violations
        ));
    }
    out
}
