//! Random binary trees over a token sequence: the smallest-utility token of
//! every span becomes the parent of the trees built on its left and right
//! sub-spans. All spans of one depth are processed in a single level.

use crate::perturb::Key;
use crate::recursion::{Structure, Violation};

/// Tree (or, mid-recursion, forest) over nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryTreeValue {
    /// One root for a finished tree.
    pub roots: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub left: Vec<Option<usize>>,
    pub right: Vec<Option<usize>>,
}

impl BinaryTreeValue {
    fn empty(n: usize) -> Self {
        Self { roots: Vec::new(), parent: vec![None; n], left: vec![None; n], right: vec![None; n] }
    }

    pub fn root(&self) -> Option<usize> {
        match self.roots.as_slice() {
            [r] => Some(*r),
            _ => None,
        }
    }

    /// In-order node sequence starting from `root`.
    pub fn in_order(&self, root: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.parent.len());
        let mut stack = Vec::new();
        let mut cur = Some(root);
        while cur.is_some() || !stack.is_empty() {
            while let Some(c) = cur {
                if stack.len() > self.parent.len() {
                    return out; // cyclic links; the caller sees a short sequence
                }
                stack.push(c);
                cur = self.left[c];
            }
            let c = stack.pop().expect("nonempty");
            out.push(c);
            if out.len() > self.parent.len() {
                return out;
            }
            cur = self.right[c];
        }
        out
    }
}

/// Auxiliary state: the ordered list of nonempty spans `[lo, hi)` still to
/// be rooted. Empty sub-spans are never stored; `combine` recomputes where
/// they were from the spans and winners of its own level.
#[derive(Debug, Clone)]
pub struct BinaryTree {
    n: usize,
}

impl BinaryTree {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

pub fn binary_tree_def(n: usize) -> BinaryTree {
    BinaryTree::new(n)
}

impl Structure for BinaryTree {
    type Aux = Vec<(usize, usize)>;
    type Value = BinaryTreeValue;

    fn num_keys(&self) -> usize {
        self.n
    }

    fn initial(&self) -> (Vec<Key>, Self::Aux) {
        let spans = if self.n > 0 { vec![(0, self.n)] } else { Vec::new() };
        ((0..self.n).collect(), spans)
    }

    fn stop(&self, keys: &[Key], _: &Self::Aux) -> bool {
        keys.is_empty()
    }

    fn split(&self, _: &[Key], spans: &Self::Aux) -> Vec<Vec<Key>> {
        spans.iter().map(|&(lo, hi)| (lo..hi).collect()).collect()
    }

    fn map(&self, keys: &[Key], spans: &Self::Aux, winners: &[Key]) -> (Vec<Key>, Self::Aux) {
        let mut next = Vec::with_capacity(2 * spans.len());
        for (&(lo, hi), &w) in spans.iter().zip(winners) {
            if w > lo {
                next.push((lo, w));
            }
            if w + 1 < hi {
                next.push((w + 1, hi));
            }
        }
        let mut is_winner = vec![false; self.n];
        for &w in winners {
            is_winner[w] = true;
        }
        (keys.iter().copied().filter(|&k| !is_winner[k]).collect(), next)
    }

    fn leaf(&self, _: &[Key], _: &Self::Aux) -> BinaryTreeValue {
        BinaryTreeValue::empty(self.n)
    }

    fn combine(&self, mut child: BinaryTreeValue, _: &[Key], spans: &Self::Aux, winners: &[Key]) -> BinaryTreeValue {
        let sub_roots = std::mem::take(&mut child.roots);
        let mut next = sub_roots.into_iter();
        for (&(lo, hi), &w) in spans.iter().zip(winners) {
            if w > lo {
                let c = next.next().expect("one subtree per nonempty left span");
                child.left[w] = Some(c);
                child.parent[c] = Some(w);
            }
            if w + 1 < hi {
                let c = next.next().expect("one subtree per nonempty right span");
                child.right[w] = Some(c);
                child.parent[c] = Some(w);
            }
        }
        child.roots = winners.to_vec();
        child
    }

    fn validate(&self, value: &BinaryTreeValue) -> Result<(), Violation> {
        let root = value
            .root()
            .ok_or_else(|| Violation(format!("expected a single root, found {}", value.roots.len())))?;
        if value.parent.len() != self.n || value.left.len() != self.n || value.right.len() != self.n {
            return Err(Violation("link arrays do not cover all nodes".into()));
        }
        if value.parent[root].is_some() {
            return Err(Violation(format!("root {root} has a parent")));
        }
        for v in 0..self.n {
            for c in [value.left[v], value.right[v]].into_iter().flatten() {
                if value.parent[c] != Some(v) {
                    return Err(Violation(format!("node {c} is a child of {v} but its parent link disagrees")));
                }
            }
        }
        let order = value.in_order(root);
        if order != (0..self.n).collect::<Vec<_>>() {
            return Err(Violation(format!("in-order traversal {order:?} is not 0..{}", self.n)));
        }
        Ok(())
    }

    fn canonical(&self, value: &BinaryTreeValue) -> String {
        let parts: Vec<String> = value
            .parent
            .iter()
            .map(|p| p.map_or_else(|| "-".to_string(), |x| x.to_string()))
            .collect();
        format!("[{}]", parts.join(","))
    }

    fn features(&self, value: &BinaryTreeValue) -> Vec<usize> {
        value
            .parent
            .iter()
            .enumerate()
            .map(|(v, p)| v * (self.n + 1) + p.unwrap_or(self.n))
            .collect()
    }
}
