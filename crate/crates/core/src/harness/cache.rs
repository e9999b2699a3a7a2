//! On-disk cache of converged priors on the original web.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::graph::{Graph, NodeId};
use crate::solver::{ppr_from_scratch, NodeScores, PprSolution, SolverConfig, SolverStats};

const MAGIC: &[u8; 8] = b"VWPRIOR1";

/// SHA-256 over the adjacency structure.
pub fn graph_fingerprint(g: &Graph) -> String {
    let mut h = Sha256::new();
    h.update((g.node_count() as u64).to_le_bytes());
    h.update((g.edge_count() as u64).to_le_bytes());
    for &o in g.offsets() {
        h.update((o as u64).to_le_bytes());
    }
    for &t in g.targets() {
        h.update(t.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Priors keyed by (graph, alpha, epsilon, selection, source). Without a
/// directory every lookup computes.
#[derive(Clone, Debug)]
pub struct PriorCache {
    dir: Option<PathBuf>,
    graph_key: String,
}

impl PriorCache {
    pub fn new(dir: Option<PathBuf>, g: &Graph) -> PriorCache {
        let graph_key = if dir.is_some() {
            graph_fingerprint(g)
        } else {
            String::new()
        };
        PriorCache { dir, graph_key }
    }

    fn path(&self, dir: &Path, source: NodeId, cfg: &SolverConfig) -> PathBuf {
        let mut h = Sha256::new();
        h.update(self.graph_key.as_bytes());
        h.update(cfg.alpha.to_bits().to_le_bytes());
        h.update(cfg.epsilon.to_bits().to_le_bytes());
        h.update(format!("{:?}/{:?}", cfg.selection, cfg.dangling).as_bytes());
        h.update(source.to_le_bytes());
        dir.join(format!("prior-{}.bin", hex::encode(h.finalize())))
    }

    pub fn get_or_compute(&self, g: &Graph, source: NodeId, cfg: &SolverConfig) -> Result<PprSolution> {
        let Some(dir) = &self.dir else {
            return ppr_from_scratch(g, source, cfg);
        };
        let path = self.path(dir, source, cfg);
        if let Ok(sol) = read_prior(&path, g.node_count()) {
            return Ok(sol);
        }
        let sol = ppr_from_scratch(g, source, cfg)?;
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        write_prior(&tmp, &sol)?;
        fs::rename(&tmp, &path)?;
        Ok(sol)
    }
}

fn write_prior(path: &Path, sol: &PprSolution) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(sol.pi.len() as u64).to_le_bytes())?;
    for v in sol.pi.as_slice().iter().chain(sol.r.as_slice()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_prior(path: &Path, n: usize) -> Result<PprSolution> {
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    if &magic != MAGIC || u64::from_le_bytes(len) != n as u64 {
        return Err(invalid(format!("{} is not a prior for {n} nodes", path.display())));
    }
    let mut read_vec = || -> Result<Vec<f64>> {
        let mut buf = vec![0u8; 8 * n];
        r.read_exact(&mut buf)?;
        Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let pi = NodeScores::from_vec(read_vec()?);
    let res = NodeScores::from_vec(read_vec()?);
    Ok(PprSolution {
        stats: SolverStats {
            final_residual_l1: res.l1(),
            ..SolverStats::default()
        },
        pi,
        r: res,
    })
}
