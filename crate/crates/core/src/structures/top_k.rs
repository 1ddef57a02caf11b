//! k smallest utilities: the Plackett-Luce chain truncated after k draws.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::perturb::Key;
use crate::recursion::{Structure, Violation};

/// Unordered subset of `k` keys, stored ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetValue {
    pub items: Vec<Key>,
}

/// Top-k subset selection over items `0..d`. The auxiliary state is the
/// number of items still to select.
#[derive(Debug, Clone)]
pub struct TopK {
    d: usize,
    k: usize,
}

impl TopK {
    pub fn new(d: usize, k: usize) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::InvalidParameter(format!("top-k needs 1 <= k <= d, got k={k}, d={d}")));
        }
        Ok(Self { d, k })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

pub fn top_k_def(d: usize, k: usize) -> Result<TopK> {
    TopK::new(d, k)
}

impl Structure for TopK {
    type Aux = usize;
    type Value = SubsetValue;

    fn num_keys(&self) -> usize {
        self.d
    }

    fn initial(&self) -> (Vec<Key>, usize) {
        ((0..self.d).collect(), self.k)
    }

    fn stop(&self, keys: &[Key], remaining: &usize) -> bool {
        keys.is_empty() || *remaining == 0
    }

    fn split(&self, keys: &[Key], _: &usize) -> Vec<Vec<Key>> {
        vec![keys.to_vec()]
    }

    fn map(&self, keys: &[Key], remaining: &usize, winners: &[Key]) -> (Vec<Key>, usize) {
        (without(keys, winners[0]), remaining - 1)
    }

    fn leaf(&self, _: &[Key], _: &usize) -> SubsetValue {
        SubsetValue { items: Vec::new() }
    }

    fn combine(&self, mut child: SubsetValue, _: &[Key], _: &usize, winners: &[Key]) -> SubsetValue {
        let pos = child.items.binary_search(&winners[0]).unwrap_or_else(|p| p);
        child.items.insert(pos, winners[0]);
        child
    }

    fn validate(&self, value: &SubsetValue) -> std::result::Result<(), Violation> {
        if value.items.len() != self.k {
            return Err(Violation(format!("subset has {} items, expected {}", value.items.len(), self.k)));
        }
        let distinct: BTreeSet<_> = value.items.iter().collect();
        if distinct.len() != value.items.len() {
            return Err(Violation("subset repeats an item".into()));
        }
        if let Some(x) = value.items.iter().find(|&&x| x >= self.d) {
            return Err(Violation(format!("item {x} outside 0..{}", self.d)));
        }
        Ok(())
    }

    fn canonical(&self, value: &SubsetValue) -> String {
        let mut items = value.items.clone();
        items.sort_unstable();
        format!("{{{}}}", join(&items))
    }

    fn features(&self, value: &SubsetValue) -> Vec<usize> {
        value.items.clone()
    }
}

pub(crate) fn without(keys: &[Key], drop: Key) -> Vec<Key> {
    keys.iter().copied().filter(|&k| k != drop).collect()
}

pub(crate) fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::Utilities;
    use crate::recursion::run_struct;

    #[test]
    fn k_out_of_range() {
        assert!(matches!(top_k_def(3, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(top_k_def(3, 4), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn selects_smallest() {
        let def = top_k_def(3, 2).unwrap();
        let (x, _) = run_struct(&def, &Utilities::new(vec![0.3, 0.1, 0.5]).unwrap()).unwrap();
        assert_eq!(x.items, vec![0, 1]);
        let all = top_k_def(3, 3).unwrap();
        let (x, _) = run_struct(&all, &Utilities::new(vec![0.9, 0.1, 0.5]).unwrap()).unwrap();
        assert_eq!(x.items, vec![0, 1, 2]);
        assert!(all.validate(&x).is_ok());
        assert!(all.validate(&SubsetValue { items: vec![0, 0, 1] }).is_err());
    }
}
