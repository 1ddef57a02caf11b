//! Edge-list graphs shared by the spanning-tree structures.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Vertices `0..num_vertices`; the position of an edge in `edges` is its key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub num_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub directed: bool,
}

impl Graph {
    /// Checks ids, self-loops and duplicate edges.
    pub fn new(num_vertices: usize, edges: Vec<(usize, usize)>, directed: bool) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= num_vertices || v >= num_vertices {
                return Err(Error::InvalidArgument(format!("edge {i} ({u},{v}) has a vertex outside 0..{num_vertices}")));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("edge {i} is a self-loop on {u}")));
            }
            let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!("edge {i} ({u},{v}) is a duplicate")));
            }
        }
        Ok(Self { num_vertices, edges, directed })
    }

    /// All `n(n-1)/2` undirected edges, lexicographic.
    pub fn complete_undirected(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        Self { num_vertices: n, edges, directed: false }
    }

    /// All `n(n-1)` directed edges, lexicographic.
    pub fn complete_directed(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect();
        Self { num_vertices: n, edges, directed: true }
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
}
