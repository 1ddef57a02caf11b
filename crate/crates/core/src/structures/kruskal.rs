//! Kruskal's algorithm: repeatedly take the lightest edge between two
//! components, merge them, and drop every edge that became internal.

use crate::error::{Error, Result};
use crate::perturb::Key;
use crate::recursion::{Structure, Violation};

use super::graph::Graph;
use super::union_find::UnionFind;

/// Undirected spanning tree as ascending edge keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpanningTreeValue {
    pub edges: Vec<Key>,
}

/// Keys are edge positions in the graph's edge list; the auxiliary state is
/// the current component structure.
#[derive(Debug, Clone)]
pub struct Kruskal {
    graph: Graph,
}

impl Kruskal {
    /// Fails with an infeasible-graph error if the graph is disconnected.
    pub fn new(graph: Graph) -> Result<Self> {
        let mut uf = UnionFind::new(graph.num_vertices);
        for &(u, v) in &graph.edges {
            uf.union(u, v);
        }
        if uf.components() > 1 {
            return Err(Error::InfeasibleGraph(format!(
                "graph has {} connected components",
                uf.components()
            )));
        }
        Ok(Self { graph })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn endpoints(&self, key: Key) -> (usize, usize) {
        self.graph.edges[key]
    }
}

pub fn kruskal_def(graph: Graph) -> Result<Kruskal> {
    Kruskal::new(graph)
}

impl Structure for Kruskal {
    type Aux = UnionFind;
    type Value = SpanningTreeValue;

    fn num_keys(&self) -> usize {
        self.graph.num_edges()
    }

    fn initial(&self) -> (Vec<Key>, UnionFind) {
        ((0..self.graph.num_edges()).collect(), UnionFind::new(self.graph.num_vertices))
    }

    fn stop(&self, keys: &[Key], uf: &UnionFind) -> bool {
        keys.is_empty() || uf.components() <= 1
    }

    fn split(&self, keys: &[Key], _: &UnionFind) -> Vec<Vec<Key>> {
        vec![keys.to_vec()]
    }

    fn map(&self, keys: &[Key], uf: &UnionFind, winners: &[Key]) -> (Vec<Key>, UnionFind) {
        let mut uf = uf.clone();
        let (u, v) = self.endpoints(winners[0]);
        uf.union(u, v);
        let next = keys
            .iter()
            .copied()
            .filter(|&k| {
                let (a, b) = self.endpoints(k);
                uf.find(a) != uf.find(b)
            })
            .collect();
        (next, uf)
    }

    fn leaf(&self, _: &[Key], _: &UnionFind) -> SpanningTreeValue {
        SpanningTreeValue { edges: Vec::new() }
    }

    fn combine(&self, mut child: SpanningTreeValue, _: &[Key], _: &UnionFind, winners: &[Key]) -> SpanningTreeValue {
        let pos = child.edges.binary_search(&winners[0]).unwrap_or_else(|p| p);
        child.edges.insert(pos, winners[0]);
        child
    }

    fn validate(&self, value: &SpanningTreeValue) -> std::result::Result<(), Violation> {
        let n = self.graph.num_vertices;
        if value.edges.len() + 1 != n.max(1) {
            return Err(Violation(format!("tree has {} edges, expected {}", value.edges.len(), n.saturating_sub(1))));
        }
        let mut uf = UnionFind::new(n);
        for &k in &value.edges {
            let Some(&(u, v)) = self.graph.edges.get(k) else {
                return Err(Violation(format!("edge key {k} is not in the graph")));
            };
            if !uf.union(u, v) {
                return Err(Violation(format!("edge {u}-{v} closes a cycle")));
            }
        }
        if uf.components() > 1 {
            return Err(Violation("tree does not span all vertices".into()));
        }
        Ok(())
    }

    fn canonical(&self, value: &SpanningTreeValue) -> String {
        let mut pairs: Vec<(usize, usize)> = value
            .edges
            .iter()
            .map(|&k| {
                let (u, v) = self.endpoints(k);
                (u.min(v), u.max(v))
            })
            .collect();
        pairs.sort_unstable();
        pairs.iter().map(|(u, v)| format!("{u}-{v}")).collect::<Vec<_>>().join(";")
    }

    fn features(&self, value: &SpanningTreeValue) -> Vec<usize> {
        value.edges.clone()
    }

    fn key_label(&self, key: Key) -> String {
        let (u, v) = self.endpoints(key);
        format!("{u}-{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::Utilities;
    use crate::recursion::run_struct;

    fn triangle() -> Kruskal {
        // a = 0-1, b = 1-2, c = 0-2
        kruskal_def(Graph::new(3, vec![(0, 1), (1, 2), (0, 2)], false).unwrap()).unwrap()
    }

    #[test]
    fn triangle_hand_execution() {
        let def = triangle();
        let (x, t) = run_struct(&def, &Utilities::new(vec![0.2, 0.9, 0.5]).unwrap()).unwrap();
        assert_eq!(x.edges, vec![0, 2]);
        assert_eq!(t.winners().collect::<Vec<_>>(), vec![0, 2]);
        assert!(def.validate(&x).is_ok());
    }

    #[test]
    fn path_graph_returns_itself() {
        let def = kruskal_def(Graph::new(4, vec![(0, 1), (1, 2), (2, 3)], false).unwrap()).unwrap();
        let (x, _) = run_struct(&def, &Utilities::new(vec![0.7, 0.1, 0.4]).unwrap()).unwrap();
        assert_eq!(x.edges, vec![0, 1, 2]);
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = Graph::new(4, vec![(0, 1), (2, 3)], false).unwrap();
        assert!(matches!(kruskal_def(g), Err(Error::InfeasibleGraph(_))));
    }

    #[test]
    fn validation_diagnostics() {
        let def = triangle();
        assert!(def.validate(&SpanningTreeValue { edges: vec![0] }).is_err());
        let k4 = kruskal_def(Graph::complete_undirected(4)).unwrap();
        // 0-1, 0-2, 1-2 is a cycle
        let e = k4.validate(&SpanningTreeValue { edges: vec![0, 1, 3] }).unwrap_err();
        assert!(e.0.contains("cycle"), "{e}");
    }
}
