//! Line-oriented graph files.
//!
//! ```text
//! graph directed 3
//! root 0
//! 0 1
//! 1 2
//! ```
//!
//! Blank lines and `#` comments are ignored. Vertex ids are 0-based.

use std::collections::HashSet;
use std::path::Path;

use stochinv::structures::Graph;

use crate::error::{CliError, CliResult};

/// A parsed graph file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFile {
    pub graph: Graph,
    pub root: Option<usize>,
}

fn err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::user(format!("line {line}: {msg}"))
}

fn parse_id(tok: &str, n: usize, line: usize) -> CliResult<usize> {
    let v: usize = tok.parse().map_err(|_| err(line, format!("'{tok}' is not a vertex id")))?;
    if v >= n {
        return Err(err(line, format!("vertex {v} out of range for {n} vertices")));
    }
    Ok(v)
}

impl GraphFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut header: Option<(bool, usize)> = None;
        let mut root = None;
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let toks: Vec<&str> = content.split_whitespace().collect();
            let Some((directed, n)) = header else {
                if toks.len() != 3 || toks[0] != "graph" {
                    return Err(err(line, "expected header 'graph <directed|undirected> <num_vertices>'"));
                }
                let directed = match toks[1] {
                    "directed" => true,
                    "undirected" => false,
                    other => return Err(err(line, format!("unknown graph type '{other}'"))),
                };
                let n = toks[2].parse().map_err(|_| err(line, format!("'{}' is not a vertex count", toks[2])))?;
                header = Some((directed, n));
                continue;
            };
            match toks.as_slice() {
                ["root", r] => {
                    if root.is_some() {
                        return Err(err(line, "duplicate root line"));
                    }
                    if !directed {
                        return Err(err(line, "root lines are only allowed in directed graphs"));
                    }
                    root = Some(parse_id(r, n, line)?);
                }
                [u, v] => {
                    let (u, v) = (parse_id(u, n, line)?, parse_id(v, n, line)?);
                    if u == v {
                        return Err(err(line, format!("self-loop on vertex {u}")));
                    }
                    let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
                    if !seen.insert(key) {
                        return Err(err(line, format!("duplicate edge {u} {v}")));
                    }
                    edges.push((u, v));
                }
                _ => return Err(err(line, format!("expected 'u v' or 'root r', got '{content}'"))),
            }
        }
        let (directed, n) = header.ok_or_else(|| CliError::user("graph file is empty"))?;
        let graph = Graph::new(n, edges, directed)?;
        Ok(GraphFile { graph, root })
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::user(format!("cannot read graph file {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::User(inner) => CliError::user(format!("{}: {inner}", path.display())),
            other => other,
        })
    }
}
