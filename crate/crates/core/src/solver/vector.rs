use std::io::{BufRead, Write};

use crate::error::{invalid, Error, Result};
use crate::graph::NodeId;

/// Scores indexed by node ID. Stored densely; text output lists only the
/// nonzero entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeScores {
    values: Vec<f64>,
}

/// PPR estimate: nonnegative probability mass per node.
pub type PprVector = NodeScores;
/// Residual of a PPR estimate; entries may be negative.
pub type ResidualVector = NodeScores;

impl NodeScores {
    pub fn zeros(n: usize) -> NodeScores {
        NodeScores { values: vec![0.0; n] }
    }

    pub fn unit(n: usize, at: NodeId, mass: f64) -> NodeScores {
        let mut v = NodeScores::zeros(n);
        v.values[at as usize] = mass;
        v
    }

    pub fn from_vec(values: Vec<f64>) -> NodeScores {
        NodeScores { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, u: NodeId) -> f64 {
        self.values[u as usize]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn l1(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn l1_distance(&self, other: &NodeScores) -> f64 {
        assert_eq!(self.len(), other.len(), "dimension mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn max_abs_distance(&self, other: &NodeScores) -> f64 {
        assert_eq!(self.len(), other.len(), "dimension mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn iter_nonzero(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (i as NodeId, x))
    }

    pub fn support_len(&self) -> usize {
        self.values.iter().filter(|&&x| x != 0.0).count()
    }

    /// `node_id score` per nonzero entry, ascending node ID. Scores use the
    /// shortest decimal form that parses back to the same `f64`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (i, x) in self.iter_nonzero() {
            writeln!(w, "{i} {x:?}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the text form into a vector of length `n`.
    pub fn read_text<R: BufRead>(r: R, n: usize) -> Result<NodeScores> {
        let mut out = NodeScores::zeros(n);
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            let mut parts = text.split_whitespace();
            let (Some(id), Some(score), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(parse_err("expected `node_id score`".into()));
            };
            let id: usize = id.parse().map_err(|_| parse_err(format!("bad node id {id:?}")))?;
            let score: f64 = score
                .parse()
                .map_err(|_| parse_err(format!("bad score {score:?}")))?;
            if id >= n {
                return Err(invalid(format!("node {id} outside vector of length {n}")));
            }
            out.values[id] = score;
        }
        Ok(out)
    }
}

impl From<Vec<f64>> for NodeScores {
    fn from(values: Vec<f64>) -> Self {
        NodeScores { values }
    }
}
