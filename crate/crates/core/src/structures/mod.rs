//! Concrete structures: subsets, permutations, matchings, binary trees,
//! spanning trees and arborescences.

mod argsort;
mod binary_tree;
mod cle;
mod graph;
mod kind;
mod kruskal;
mod matching;
mod top_k;
mod union_find;

pub use argsort::{argsort_def, Argsort, PermutationValue};
pub use binary_tree::{binary_tree_def, BinaryTree, BinaryTreeValue};
pub use cle::{cle_def, ArborescenceValue, Cle, CleState};
pub use graph::Graph;
pub use kind::{small_instances, StructureKind, StructureVisitor};
pub use kruskal::{kruskal_def, Kruskal, SpanningTreeValue};
pub use matching::{matching_def, Matching, MatchingValue};
pub use top_k::{top_k_def, SubsetValue, TopK};
pub use union_find::UnionFind;

use crate::recursion::{Structure, Violation};

/// Checks a structure value against its definition's invariants.
pub fn validate<D: Structure + ?Sized>(def: &D, value: &D::Value) -> Result<(), Violation> {
    def.validate(value)
}

/// Size of the symmetric difference of two feature sets.
pub fn hamming(a: &[usize], b: &[usize]) -> usize {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    a.len() + b.len() - 2 * common
}
