//! Line-oriented graph files.
//!
//! ```text
//! # comment
//! vertices 2
//! v 0 1
//! v 1 1
//! e 0 1 1
//! ```
//!
//! `v <id> <theta>` gives the speed weight of each vertex and
//! `e <id1> <id2> <pi>` an edge conductance. An edge may be listed in both
//! orientations provided the two weights agree. Numbers are written with the
//! shortest representation that round-trips exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{SpeedPreset, WeightedGraph};
use crate::error::{Error, Result};

fn invalid(line: usize, message: impl Into<String>) -> Error {
    Error::Validation {
        line,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| invalid(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| invalid(line, format!("cannot parse {what} from {tok:?}")))
}

/// Parses a graph from the text format.
pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let mut n: Option<(usize, usize)> = None;
    let mut theta: Vec<Option<(f64, usize)>> = Vec::new();
    let mut edges: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    let mut order: Vec<(usize, usize)> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let tag = toks.next().unwrap();
        match tag {
            "vertices" => {
                if n.is_some() {
                    return Err(invalid(line, "duplicate vertices header"));
                }
                let count: usize = parse_num(toks.next(), line, "vertex count")?;
                if count == 0 {
                    return Err(invalid(line, "vertex count must be positive"));
                }
                n = Some((count, line));
                theta = vec![None; count];
            }
            "v" | "e" if n.is_none() => {
                return Err(invalid(line, "`vertices N` header must come first"));
            }
            "v" => {
                let count = n.unwrap().0;
                let id: usize = parse_num(toks.next(), line, "vertex id")?;
                let t: f64 = parse_num(toks.next(), line, "theta")?;
                if id >= count {
                    return Err(invalid(line, format!("vertex {id} out of range 0..{count}")));
                }
                if !(t > 0.0 && t.is_finite()) {
                    return Err(invalid(line, format!("theta of vertex {id} must be positive, got {t}")));
                }
                if theta[id].is_some() {
                    return Err(invalid(line, format!("vertex {id} declared twice")));
                }
                theta[id] = Some((t, line));
            }
            "e" => {
                let count = n.unwrap().0;
                let a: usize = parse_num(toks.next(), line, "edge endpoint")?;
                let b: usize = parse_num(toks.next(), line, "edge endpoint")?;
                let w: f64 = parse_num(toks.next(), line, "edge weight")?;
                if a >= count || b >= count {
                    return Err(invalid(line, format!("edge ({a}, {b}) out of range 0..{count}")));
                }
                if a == b {
                    return Err(invalid(line, format!("loop at vertex {a}")));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return Err(invalid(line, format!("edge weight must be positive, got {w}")));
                }
                let key = (a.min(b), a.max(b));
                match edges.get(&key) {
                    Some(&(prev, prev_line)) if prev != w => {
                        return Err(invalid(
                            line,
                            format!("asymmetric weight for {{{a}, {b}}}: {w} here, {prev} on line {prev_line}"),
                        ));
                    }
                    Some(_) => {}
                    None => {
                        edges.insert(key, (w, line));
                        order.push(key);
                    }
                }
            }
            other => return Err(invalid(line, format!("unknown record {other:?}"))),
        }
        if toks.next().is_some() {
            return Err(invalid(line, "trailing tokens"));
        }
    }

    let (count, header_line) = n.ok_or_else(|| invalid(0, "missing `vertices N` header"))?;
    let mut thetas = Vec::with_capacity(count);
    let mut theta_lines = Vec::with_capacity(count);
    for (id, t) in theta.iter().enumerate() {
        let (t, l) = t.ok_or_else(|| invalid(header_line, format!("vertex {id} has no `v` line")))?;
        thetas.push(t);
        theta_lines.push(l);
    }
    let list: Vec<(usize, usize, f64)> = order.iter().map(|&(a, b)| (a, b, edges[&(a, b)].0)).collect();

    // connectivity is reported against the `v` line of an unreachable vertex
    let mut uf = super::UnionFind::new(count);
    for &(a, b, _) in &list {
        uf.union(a, b);
    }
    if let Some(lost) = (0..count).find(|&v| uf.find(v) != uf.find(0)) {
        return Err(invalid(
            theta_lines[lost],
            format!("graph is disconnected: vertex {lost} is not reachable from vertex 0"),
        ));
    }
    WeightedGraph::new(count, &list, SpeedPreset::Custom(thetas))
}

/// Renders a graph in the text format.
pub fn format_graph(g: &WeightedGraph) -> String {
    let mut out = String::new();
    writeln!(out, "vertices {}", g.len()).unwrap();
    for (x, t) in g.theta().iter().enumerate() {
        writeln!(out, "v {x} {t:?}").unwrap();
    }
    for (x, y, w) in g.edges() {
        writeln!(out, "e {x} {y} {w:?}").unwrap();
    }
    out
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    parse_graph(&std::fs::read_to_string(path)?)
}

pub fn store_graph(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_graph(g))?;
    Ok(())
}
