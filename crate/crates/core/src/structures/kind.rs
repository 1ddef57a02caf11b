use crate::error::Result;
use crate::recursion::Structure;

use super::{argsort_def, binary_tree_def, cle_def, kruskal_def, matching_def, top_k_def, Graph};

/// A structure definition chosen at runtime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureKind {
    TopK { d: usize, k: usize },
    Argsort { d: usize },
    Matching { n: usize },
    BinaryTree { n: usize },
    Kruskal { graph: Graph },
    Cle { graph: Graph, root: usize },
}

/// Receives the concrete definition built from a [`StructureKind`].
pub trait StructureVisitor {
    type Output;
    fn visit<D: Structure>(&mut self, def: &D) -> Self::Output;
}

impl StructureKind {
    /// Builds the definition and hands it to `visitor`.
    pub fn visit<V: StructureVisitor>(&self, visitor: &mut V) -> Result<V::Output> {
        Ok(match self {
            StructureKind::TopK { d, k } => visitor.visit(&top_k_def(*d, *k)?),
            StructureKind::Argsort { d } => visitor.visit(&argsort_def(*d)),
            StructureKind::Matching { n } => visitor.visit(&matching_def(*n)),
            StructureKind::BinaryTree { n } => visitor.visit(&binary_tree_def(*n)),
            StructureKind::Kruskal { graph } => visitor.visit(&kruskal_def(graph.clone())?),
            StructureKind::Cle { graph, root } => visitor.visit(&cle_def(graph.clone(), *root)?),
        })
    }

    pub fn num_keys(&self) -> usize {
        match self {
            StructureKind::TopK { d, .. } | StructureKind::Argsort { d } | StructureKind::BinaryTree { n: d } => *d,
            StructureKind::Matching { n } => n * n,
            StructureKind::Kruskal { graph } | StructureKind::Cle { graph, .. } => graph.num_edges(),
        }
    }

    /// Short name such as `top_k(d=3,k=2)`.
    pub fn label(&self) -> String {
        match self {
            StructureKind::TopK { d, k } => format!("top_k(d={d},k={k})"),
            StructureKind::Argsort { d } => format!("argsort(d={d})"),
            StructureKind::Matching { n } => format!("matching(n={n})"),
            StructureKind::BinaryTree { n } => format!("binary_tree(n={n})"),
            StructureKind::Kruskal { graph } => format!("kruskal(|V|={},|E|={})", graph.num_vertices, graph.num_edges()),
            StructureKind::Cle { graph, root } => {
                format!("cle(|V|={},|E|={},root={root})", graph.num_vertices, graph.num_edges())
            }
        }
    }
}

/// Every structure at small sizes: top-k for `d <= 6` and all `k`, argsort
/// for `d <= 6`, matchings for `n <= 4`, binary trees for `n <= 6`, Kruskal
/// on complete graphs with up to 5 vertices and Chu-Liu-Edmonds on complete
/// digraphs with up to 4 vertices.
pub fn small_instances() -> Vec<StructureKind> {
    let mut out = Vec::new();
    for d in 1..=6 {
        for k in 1..=d {
            out.push(StructureKind::TopK { d, k });
        }
    }
    out.extend((1..=6).map(|d| StructureKind::Argsort { d }));
    out.extend((1..=4).map(|n| StructureKind::Matching { n }));
    out.extend((1..=6).map(|n| StructureKind::BinaryTree { n }));
    out.extend((2..=5).map(|v| StructureKind::Kruskal { graph: Graph::complete_undirected(v) }));
    out.extend((2..=4).map(|v| StructureKind::Cle { graph: Graph::complete_directed(v), root: 0 }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Keys;
    impl StructureVisitor for Keys {
        type Output = usize;
        fn visit<D: Structure>(&mut self, def: &D) -> usize {
            def.num_keys()
        }
    }

    #[test]
    fn num_keys_agrees_with_definitions() {
        for kind in small_instances() {
            assert_eq!(kind.visit(&mut Keys).unwrap(), kind.num_keys(), "{}", kind.label());
        }
        assert!(StructureKind::TopK { d: 2, k: 3 }.visit(&mut Keys).is_err());
    }
}
