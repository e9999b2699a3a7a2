//! Single-source personalized PageRank by forward push, plus reference
//! solvers and the residual diagnostics used to check them.

mod oracle;
mod push;
mod vector;

pub use oracle::{
    l1_error_bound, oracle_dense, oracle_dense_with, power_iteration, power_iteration_with,
    residual_of, residual_of_with, ORACLE_NODE_CAP,
};
pub use push::{
    gauss_southwell, gauss_southwell_observed, ppr_from_scratch, PushEngine, PushEvent, RunCounts,
};
pub use vector::{NodeScores, PprVector, ResidualVector};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::graph::DanglingRule;

/// Order in which nodes with residual above the threshold are pushed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// FIFO work queue; a node is queued at most once at a time.
    #[default]
    Queue,
    /// Largest |residual| first, lowest node ID on ties.
    MaxResidual,
}

impl std::str::FromStr for Selection {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Selection> {
        match s.to_ascii_lowercase().as_str() {
            "queue" | "fifo" => Ok(Selection::Queue),
            "max_residual" | "max-residual" | "max" => Ok(Selection::MaxResidual),
            other => Err(invalid(format!("unknown selection policy {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Probability of following a link; `1 - alpha` is the restart mass.
    pub alpha: f64,
    /// Push while some |residual| exceeds this.
    pub epsilon: f64,
    pub max_pushes: Option<u64>,
    pub selection: Selection,
    pub dangling: DanglingRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.85,
            epsilon: 1e-9,
            max_pushes: None,
            selection: Selection::Queue,
            dangling: DanglingRule::Source,
        }
    }
}

impl SolverConfig {
    pub fn new(alpha: f64, epsilon: f64) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            alpha,
            epsilon,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_epsilon(self, epsilon: f64) -> SolverConfig {
        SolverConfig { epsilon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Cost and convergence figures of one solver run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Number of push operations.
    pub pushes: u64,
    /// Distinct nodes pushed at least once.
    pub touched_nodes: usize,
    pub wall_time_s: f64,
    pub initial_residual_l1: f64,
    pub final_residual_l1: f64,
}

impl SolverStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PprSolution {
    pub pi: PprVector,
    pub r: ResidualVector,
    pub stats: SolverStats,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.85, 1e-6).is_ok());
        assert!(SolverConfig::new(1.0, 1e-6).is_err());
        assert!(SolverConfig::new(0.0, 1e-6).is_err());
        assert!(SolverConfig::new(0.85, 0.0).is_err());
        assert!(SolverConfig::new(0.85, f64::NAN).is_err());
    }

    #[test]
    fn stats_json_field_names() {
        let v: serde_json::Value = serde_json::from_str(&SolverStats::default().to_json()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "final_residual_l1",
                "initial_residual_l1",
                "pushes",
                "touched_nodes",
                "wall_time_s"
            ]
        );
    }

    #[test]
    fn selection_parse() {
        assert_eq!("queue".parse::<Selection>().unwrap(), Selection::Queue);
        assert_eq!("MAX_RESIDUAL".parse::<Selection>().unwrap(), Selection::MaxResidual);
        assert!("lifo".parse::<Selection>().is_err());
    }
}
