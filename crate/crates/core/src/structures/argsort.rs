//! Insertion sort by repeated argmin. The trace and the output coincide.

use crate::perturb::Key;
use crate::recursion::{Structure, Violation};

use super::top_k::{join, without};

/// Ordered sequence of all keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PermutationValue {
    pub order: Vec<Key>,
}

#[derive(Debug, Clone)]
pub struct Argsort {
    d: usize,
}

impl Argsort {
    pub fn new(d: usize) -> Self {
        Self { d }
    }
}

pub fn argsort_def(d: usize) -> Argsort {
    Argsort::new(d)
}

impl Structure for Argsort {
    type Aux = ();
    type Value = PermutationValue;

    fn num_keys(&self) -> usize {
        self.d
    }

    fn initial(&self) -> (Vec<Key>, ()) {
        ((0..self.d).collect(), ())
    }

    fn stop(&self, keys: &[Key], _: &()) -> bool {
        keys.is_empty()
    }

    fn split(&self, keys: &[Key], _: &()) -> Vec<Vec<Key>> {
        vec![keys.to_vec()]
    }

    fn map(&self, keys: &[Key], _: &(), winners: &[Key]) -> (Vec<Key>, ()) {
        (without(keys, winners[0]), ())
    }

    fn leaf(&self, _: &[Key], _: &()) -> PermutationValue {
        PermutationValue { order: Vec::new() }
    }

    fn combine(&self, child: PermutationValue, _: &[Key], _: &(), winners: &[Key]) -> PermutationValue {
        let mut order = Vec::with_capacity(child.order.len() + 1);
        order.push(winners[0]);
        order.extend(child.order);
        PermutationValue { order }
    }

    fn validate(&self, value: &PermutationValue) -> Result<(), Violation> {
        if value.order.len() != self.d {
            return Err(Violation(format!("permutation has length {}, expected {}", value.order.len(), self.d)));
        }
        let mut seen = vec![false; self.d];
        for &x in &value.order {
            if x >= self.d || seen[x] {
                return Err(Violation(format!("item {x} is out of range or repeated")));
            }
            seen[x] = true;
        }
        Ok(())
    }

    fn canonical(&self, value: &PermutationValue) -> String {
        format!("[{}]", join(&value.order))
    }

    fn features(&self, value: &PermutationValue) -> Vec<usize> {
        value.order.iter().enumerate().map(|(pos, &x)| pos * self.d + x).collect()
    }
}
