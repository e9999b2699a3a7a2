//! Dynamic personalized PageRank.
//!
//! Single-source PPR is computed by forward push ([`solver::gauss_southwell`]).
//! When the graph evolves by a batch of node and link changes, the previous
//! estimate and residual are carried over to the new graph
//! ([`dynamic::vw_init`], [`dynamic::tracking_init`]) so that push only has to
//! correct the difference.

pub mod dynamic;
pub mod error;
pub mod graph;
pub mod harness;
pub mod perturb;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
