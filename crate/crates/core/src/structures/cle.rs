//! Chu-Liu-Edmonds minimum arborescence.
//!
//! Every non-root super-node takes its cheapest incoming edge (one partition
//! per super-node). If the chosen edges contain a loop, the loop is
//! contracted into one super-node and the recursion continues on the edges
//! that do not lie inside it; the minimum subtraction performed by the
//! recursion is exactly the usual reduced-cost update. Winners outside the
//! loop stay live with zero residual utility, so at the next level they win
//! their partitions again deterministically.
//!
//! On the way back up, the loop is re-expanded with all its edges except the
//! one entering the vertex that the contracted solution already enters.

use crate::error::{Error, Result};
use crate::perturb::Key;
use crate::recursion::{Structure, Violation};

use super::graph::Graph;

/// Directed edges of an arborescence, ascending by key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArborescenceValue {
    pub edges: Vec<Key>,
}

/// Super-node labels (smallest member vertex) and whether the loop-free
/// level has been reached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleState {
    pub label: Vec<usize>,
    pub num_super: usize,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Cle {
    graph: Graph,
    root: usize,
}

impl Cle {
    /// Fails with an infeasible-graph error if some vertex has no incoming
    /// edge or is unreachable from the root.
    pub fn new(graph: Graph, root: usize) -> Result<Self> {
        let n = graph.num_vertices;
        if root >= n {
            return Err(Error::InvalidParameter(format!("root {root} outside 0..{n}")));
        }
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in &graph.edges {
            indeg[v] += 1;
            out[u].push(v);
        }
        if let Some(v) = (0..n).find(|&v| v != root && indeg[v] == 0) {
            return Err(Error::InfeasibleGraph(format!("vertex {v} has no incoming edges")));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(u) = stack.pop() {
            for &v in &out[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Error::InfeasibleGraph(format!("vertex {v} is unreachable from root {root}")));
        }
        Ok(Self { graph, root })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn endpoints(&self, key: Key) -> (usize, usize) {
        self.graph.edges[key]
    }

    /// Target super-node labels of the partitions, in split order.
    fn partition_labels(&self, keys: &[Key], st: &CleState) -> Vec<usize> {
        let mut labels: Vec<usize> = keys.iter().map(|&k| st.label[self.endpoints(k).1]).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// The first loop among winner pointers, scanning super-nodes in label
    /// order. Returns the loop's super-node labels.
    fn find_loop(&self, keys: &[Key], st: &CleState, winners: &[Key]) -> Option<Vec<usize>> {
        let labels = self.partition_labels(keys, st);
        let n = self.graph.num_vertices;
        let mut pred = vec![usize::MAX; n];
        for (&l, &w) in labels.iter().zip(winners) {
            pred[l] = st.label[self.endpoints(w).0];
        }
        let mut stamp = vec![usize::MAX; n];
        for (walk, &start) in labels.iter().enumerate() {
            let mut cur = start;
            while cur != usize::MAX && stamp[cur] == usize::MAX {
                stamp[cur] = walk;
                cur = pred[cur];
            }
            if cur != usize::MAX && stamp[cur] == walk {
                let mut cycle = vec![cur];
                let mut x = pred[cur];
                while x != cur {
                    cycle.push(x);
                    x = pred[x];
                }
                cycle.sort_unstable();
                return Some(cycle);
            }
        }
        None
    }
}

pub fn cle_def(graph: Graph, root: usize) -> Result<Cle> {
    Cle::new(graph, root)
}

impl Structure for Cle {
    type Aux = CleState;
    type Value = ArborescenceValue;

    fn num_keys(&self) -> usize {
        self.graph.num_edges()
    }

    fn initial(&self) -> (Vec<Key>, CleState) {
        let n = self.graph.num_vertices;
        let keys = (0..self.graph.num_edges()).filter(|&k| self.endpoints(k).1 != self.root).collect();
        (keys, CleState { label: (0..n).collect(), num_super: n, done: false })
    }

    fn stop(&self, keys: &[Key], st: &CleState) -> bool {
        keys.is_empty() || st.done || st.num_super <= 1
    }

    fn split(&self, keys: &[Key], st: &CleState) -> Vec<Vec<Key>> {
        let labels = self.partition_labels(keys, st);
        let mut parts = vec![Vec::new(); labels.len()];
        for &k in keys {
            let l = st.label[self.endpoints(k).1];
            let i = labels.binary_search(&l).expect("label present");
            parts[i].push(k);
        }
        // a non-root super-node without incoming edges yields an empty partition
        let root_label = st.label[self.root];
        let expected = (0..self.graph.num_vertices)
            .filter(|&v| st.label[v] == v && v != root_label)
            .count();
        parts.resize(expected.max(parts.len()), Vec::new());
        parts
    }

    fn map(&self, keys: &[Key], st: &CleState, winners: &[Key]) -> (Vec<Key>, CleState) {
        let Some(cycle) = self.find_loop(keys, st, winners) else {
            return (Vec::new(), CleState { done: true, ..st.clone() });
        };
        let new_label = cycle[0];
        let in_cycle = |l: usize| cycle.binary_search(&l).is_ok();
        let next = keys
            .iter()
            .copied()
            .filter(|&k| {
                let (u, v) = self.endpoints(k);
                !(in_cycle(st.label[u]) && in_cycle(st.label[v]))
            })
            .collect();
        let label = st.label.iter().map(|&l| if in_cycle(l) { new_label } else { l }).collect();
        (next, CleState { label, num_super: st.num_super + 1 - cycle.len(), done: false })
    }

    fn leaf(&self, _: &[Key], _: &CleState) -> ArborescenceValue {
        ArborescenceValue { edges: Vec::new() }
    }

    fn combine(&self, child: ArborescenceValue, keys: &[Key], st: &CleState, winners: &[Key]) -> ArborescenceValue {
        let mut edges = child.edges;
        match self.find_loop(keys, st, winners) {
            None => edges.extend_from_slice(winners),
            Some(cycle) => {
                let in_cycle = |l: usize| cycle.binary_search(&l).is_ok();
                let entry = edges
                    .iter()
                    .map(|&k| self.endpoints(k))
                    .find(|&(u, v)| in_cycle(st.label[v]) && !in_cycle(st.label[u]))
                    .map(|(_, v)| st.label[v]);
                let labels = self.partition_labels(keys, st);
                for (&l, &w) in labels.iter().zip(winners) {
                    if in_cycle(l) && Some(l) != entry {
                        edges.push(w);
                    }
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        ArborescenceValue { edges }
    }

    fn validate(&self, value: &ArborescenceValue) -> std::result::Result<(), Violation> {
        let n = self.graph.num_vertices;
        let mut parent = vec![usize::MAX; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &k in &value.edges {
            let Some(&(u, v)) = self.graph.edges.get(k) else {
                return Err(Violation(format!("edge key {k} is not in the graph")));
            };
            if v == self.root {
                return Err(Violation(format!("root {v} has an incoming edge from {u}")));
            }
            if parent[v] != usize::MAX {
                return Err(Violation(format!("vertex {v} has in-degree 2 or more")));
            }
            parent[v] = u;
            children[u].push(v);
        }
        if let Some(v) = (0..n).find(|&v| v != self.root && parent[v] == usize::MAX) {
            return Err(Violation(format!("vertex {v} has in-degree 0")));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(u) = stack.pop() {
            for &v in &children[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Violation(format!("vertex {v} is not reachable from the root (directed cycle)")));
        }
        Ok(())
    }

    fn canonical(&self, value: &ArborescenceValue) -> String {
        let mut pairs: Vec<(usize, usize)> = value.edges.iter().map(|&k| self.endpoints(k)).collect();
        pairs.sort_unstable();
        pairs.iter().map(|(u, v)| format!("{u}>{v}")).collect::<Vec<_>>().join(";")
    }

    fn features(&self, value: &ArborescenceValue) -> Vec<usize> {
        value.edges.clone()
    }

    fn key_label(&self, key: Key) -> String {
        let (u, v) = self.endpoints(key);
        format!("{u}>{v}")
    }
}
