//! Plain-text batch files.
//!
//! ```text
//! [insert_nodes]
//! 0 label=812 out=3,+1 in=7
//! 1 label=- out= in=+0
//! [delete_nodes]
//! 5
//! [insert_edges]
//! 2 4
//! [delete_edges]
//! 0 2
//! ```
//!
//! Inserted nodes are listed in batch order, one per line. Endpoints are
//! old-graph IDs, or `+k` for the k-th inserted node. `#` starts a comment.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::graph::{Endpoint, InsertedNode, NodeId, PerturbationBatch};

pub fn write_batch<W: Write>(b: &PerturbationBatch, mut w: W) -> Result<()> {
    writeln!(w, "[insert_nodes]")?;
    for (k, node) in b.inserted_nodes.iter().enumerate() {
        let label = node.label.map_or_else(|| "-".to_string(), |l| l.to_string());
        writeln!(
            w,
            "{k} label={label} out={} in={}",
            join(&node.out_edges),
            join(&node.in_edges)
        )?;
    }
    writeln!(w, "[delete_nodes]")?;
    for u in &b.deleted_nodes {
        writeln!(w, "{u}")?;
    }
    writeln!(w, "[insert_edges]")?;
    for (u, v) in &b.inserted_edges {
        writeln!(w, "{u} {v}")?;
    }
    writeln!(w, "[delete_edges]")?;
    for (u, v) in &b.deleted_edges {
        writeln!(w, "{u} {v}")?;
    }
    w.flush()?;
    Ok(())
}

fn join(eps: &[Endpoint]) -> String {
    eps.iter()
        .map(|ep| match ep {
            Endpoint::Existing(u) => u.to_string(),
            Endpoint::Inserted(k) => format!("+{k}"),
        })
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    InsertNodes,
    DeleteNodes,
    InsertEdges,
    DeleteEdges,
}

pub fn read_batch<R: BufRead>(reader: R) -> Result<PerturbationBatch> {
    let mut b = PerturbationBatch::default();
    let mut section = Section::None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let err = |message: String| Error::Parse { line: line_no, message };
        let text = line.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        if text.starts_with('[') {
            section = match text {
                "[insert_nodes]" => Section::InsertNodes,
                "[delete_nodes]" => Section::DeleteNodes,
                "[insert_edges]" => Section::InsertEdges,
                "[delete_edges]" => Section::DeleteEdges,
                other => return Err(err(format!("unknown section {other}"))),
            };
            continue;
        }
        let tokens: Vec<&str> = text.split_whitespace().collect();
        match section {
            Section::None => return Err(err("content before the first section".into())),
            Section::InsertNodes => {
                let k: usize = tokens[0].parse().map_err(|_| err(format!("bad index {}", tokens[0])))?;
                if k != b.inserted_nodes.len() {
                    return Err(err(format!("inserted node {k} out of order")));
                }
                let mut node = InsertedNode::default();
                for tok in &tokens[1..] {
                    let (key, value) = tok
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected key=value, got {tok}")))?;
                    match key {
                        "label" if value == "-" => node.label = None,
                        "label" => {
                            node.label = Some(value.parse().map_err(|_| err(format!("bad label {value}")))?)
                        }
                        "out" => node.out_edges = parse_endpoints(value).map_err(err)?,
                        "in" => node.in_edges = parse_endpoints(value).map_err(err)?,
                        other => return Err(err(format!("unknown key {other}"))),
                    }
                }
                b.inserted_nodes.push(node);
            }
            Section::DeleteNodes => {
                if tokens.len() != 1 {
                    return Err(err("expected one node ID".into()));
                }
                b.deleted_nodes.insert(parse_id(tokens[0]).map_err(err)?);
            }
            Section::InsertEdges | Section::DeleteEdges => {
                if tokens.len() != 2 {
                    return Err(err("expected two node IDs".into()));
                }
                let e = (parse_id(tokens[0]).map_err(err)?, parse_id(tokens[1]).map_err(err)?);
                let set: &mut BTreeSet<_> = if section == Section::InsertEdges {
                    &mut b.inserted_edges
                } else {
                    &mut b.deleted_edges
                };
                set.insert(e);
            }
        }
    }
    Ok(b)
}

fn parse_id(s: &str) -> std::result::Result<NodeId, String> {
    s.parse().map_err(|_| format!("bad node ID {s}"))
}

fn parse_endpoints(s: &str) -> std::result::Result<Vec<Endpoint>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| match tok.strip_prefix('+') {
            Some(k) => k.parse().map(Endpoint::Inserted).map_err(|_| format!("bad endpoint {tok}")),
            None => parse_id(tok).map(Endpoint::Existing),
        })
        .collect()
}
