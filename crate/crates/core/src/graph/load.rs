//! SNAP-style edge-list ingestion and a binary adjacency cache.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use super::{Graph, NodeId};
use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Relabel the distinct IDs seen in the file to `0..k` (ascending raw order).
    pub compact_ids: bool,
    /// Ingest every line as two opposite arcs.
    pub undirected: bool,
}

/// Counts reported at ingestion; edge counts before and after deduplication.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub nodes: usize,
    pub lines: usize,
    pub raw_edges: usize,
    pub edges: usize,
    pub self_loops: usize,
}

pub fn load_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
    load_edge_list_with(reader, LoadOptions::default()).map(|(g, _)| g)
}

pub fn load_edge_list_path(path: impl AsRef<Path>, opts: LoadOptions) -> Result<(Graph, LoadStats)> {
    let file = File::open(path.as_ref())?;
    load_edge_list_with(BufReader::with_capacity(1 << 20, file), opts)
}

pub fn load_edge_list_with<R: BufRead>(mut reader: R, opts: LoadOptions) -> Result<(Graph, LoadStats)> {
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    let mut stats = LoadStats::default();
    let mut line = Vec::with_capacity(64);
    let mut line_no = 0usize;
    let mut max_id: Option<NodeId> = None;

    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        line_no += 1;
        let text = line.trim_ascii();
        if text.is_empty() || text[0] == b'#' {
            continue;
        }
        let mut tokens = text
            .split(|b| b.is_ascii_whitespace())
            .filter(|t| !t.is_empty());
        let u = parse_id(tokens.next(), line_no)?;
        let v = parse_id(tokens.next(), line_no)?;
        if tokens.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: "expected exactly two tokens".into(),
            });
        }
        stats.lines += 1;
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v));
        if opts.undirected && u != v {
            edges.push((v, u));
        }
    }
    stats.raw_edges = edges.len();

    let mut n = max_id.map_or(0, |m| m as usize + 1);
    if opts.compact_ids {
        let mut ids: Vec<NodeId> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
        ids.sort_unstable();
        ids.dedup();
        for e in edges.iter_mut() {
            // Every endpoint is present in `ids`.
            e.0 = ids.binary_search(&e.0).unwrap() as NodeId;
            e.1 = ids.binary_search(&e.1).unwrap() as NodeId;
        }
        n = ids.len();
    }

    edges.sort_unstable();
    edges.dedup();
    edges.shrink_to_fit();
    stats.self_loops = edges.iter().filter(|&&(u, v)| u == v).count();
    stats.edges = edges.len();
    stats.nodes = n;
    let graph = Graph::from_sorted_edges(n, &edges);
    Ok((graph, stats))
}

fn parse_id(token: Option<&[u8]>, line: usize) -> Result<NodeId> {
    let token = token.ok_or_else(|| Error::Parse {
        line,
        message: "expected two node IDs".into(),
    })?;
    let mut value: u64 = 0;
    if token.is_empty() || token.len() > 10 {
        return Err(bad_token(token, line));
    }
    for &b in token {
        if !b.is_ascii_digit() {
            return Err(bad_token(token, line));
        }
        value = value * 10 + u64::from(b - b'0');
    }
    // u32::MAX is reserved so that `max_id + 1` nodes always fits.
    if value >= u64::from(NodeId::MAX) {
        return Err(Error::Parse {
            line,
            message: format!("node ID {value} out of range"),
        });
    }
    Ok(value as NodeId)
}

fn bad_token(token: &[u8], line: usize) -> Error {
    Error::Parse {
        line,
        message: format!("non-integer token {:?}", String::from_utf8_lossy(token)),
    }
}

/// Writes the graph as a SNAP-style edge list.
pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    writeln!(w, "# nodes {} edges {}", g.node_count(), g.edge_count())?;
    for (u, v) in g.edges() {
        writeln!(w, "{u}\t{v}")?;
    }
    w.flush()?;
    Ok(())
}

const MAGIC: &[u8; 8] = b"VWPPRCSR";
const VERSION: u32 = 1;

/// Binary adjacency cache: magic, version, node and edge counts, then the
/// CSR offsets (u64) and targets (u32), all little-endian.
pub fn write_binary(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.node_count() as u64).to_le_bytes())?;
    w.write_all(&(g.edge_count() as u64).to_le_bytes())?;
    for &o in g.offsets() {
        w.write_all(&(o as u64).to_le_bytes())?;
    }
    for &t in g.targets() {
        w.write_all(&t.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<Graph> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(invalid("not a graph cache file"));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(invalid(format!("unsupported cache version {version}")));
    }
    let n = read_u64(&mut r)? as usize;
    let m = read_u64(&mut r)? as usize;
    let mut offsets = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        offsets.push(read_u64(&mut r)? as usize);
    }
    let mut targets = Vec::with_capacity(m);
    for _ in 0..m {
        targets.push(read_u32(&mut r)?);
    }
    let consistent = offsets.first() == Some(&0)
        && offsets.last() == Some(&m)
        && offsets.windows(2).all(|w| w[0] <= w[1])
        && targets.iter().all(|&t| (t as usize) < n);
    if !consistent {
        return Err(invalid("corrupt graph cache"));
    }
    Ok(Graph::from_raw_parts(offsets, targets))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
