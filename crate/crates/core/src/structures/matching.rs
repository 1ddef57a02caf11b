//! Perfect matching on an n×n grid: repeatedly take the smallest cell and
//! cross out its row and column.

use crate::perturb::Key;
use crate::recursion::{Structure, Violation};

/// `(row, col)` pairs, ascending by row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MatchingValue {
    pub pairs: Vec<(usize, usize)>,
}

/// Keys are cells `row * n + col`.
#[derive(Debug, Clone)]
pub struct Matching {
    n: usize,
}

impl Matching {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn cell(&self, key: Key) -> (usize, usize) {
        (key / self.n, key % self.n)
    }

    pub fn key(&self, row: usize, col: usize) -> Key {
        row * self.n + col
    }
}

pub fn matching_def(n: usize) -> Matching {
    Matching::new(n)
}

impl Structure for Matching {
    type Aux = ();
    type Value = MatchingValue;

    fn num_keys(&self) -> usize {
        self.n * self.n
    }

    fn initial(&self) -> (Vec<Key>, ()) {
        ((0..self.n * self.n).collect(), ())
    }

    fn stop(&self, keys: &[Key], _: &()) -> bool {
        keys.is_empty()
    }

    fn split(&self, keys: &[Key], _: &()) -> Vec<Vec<Key>> {
        vec![keys.to_vec()]
    }

    fn map(&self, keys: &[Key], _: &(), winners: &[Key]) -> (Vec<Key>, ()) {
        let (r, c) = self.cell(winners[0]);
        let next = keys
            .iter()
            .copied()
            .filter(|&k| {
                let (kr, kc) = self.cell(k);
                kr != r && kc != c
            })
            .collect();
        (next, ())
    }

    fn leaf(&self, _: &[Key], _: &()) -> MatchingValue {
        MatchingValue { pairs: Vec::new() }
    }

    fn combine(&self, mut child: MatchingValue, _: &[Key], _: &(), winners: &[Key]) -> MatchingValue {
        let p = self.cell(winners[0]);
        let pos = child.pairs.binary_search(&p).unwrap_or_else(|x| x);
        child.pairs.insert(pos, p);
        child
    }

    fn validate(&self, value: &MatchingValue) -> Result<(), Violation> {
        if value.pairs.len() != self.n {
            return Err(Violation(format!("matching has {} pairs, expected {}", value.pairs.len(), self.n)));
        }
        let mut rows = vec![false; self.n];
        let mut cols = vec![false; self.n];
        for &(r, c) in &value.pairs {
            if r >= self.n || c >= self.n {
                return Err(Violation(format!("pair ({r},{c}) out of range")));
            }
            if rows[r] {
                return Err(Violation(format!("row {r} used twice")));
            }
            if cols[c] {
                return Err(Violation(format!("column {c} used twice")));
            }
            rows[r] = true;
            cols[c] = true;
        }
        Ok(())
    }

    fn canonical(&self, value: &MatchingValue) -> String {
        let mut pairs = value.pairs.clone();
        pairs.sort_unstable();
        pairs.iter().map(|(r, c)| format!("({r},{c})")).collect::<Vec<_>>().join(";")
    }

    fn features(&self, value: &MatchingValue) -> Vec<usize> {
        value.pairs.iter().map(|&(r, c)| self.key(r, c)).collect()
    }

    fn key_label(&self, key: Key) -> String {
        let (r, c) = self.cell(key);
        format!("({r},{c})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::Utilities;
    use crate::recursion::run_struct;

    #[test]
    fn forced_completion() {
        let def = matching_def(2);
        // cell (0,0) smallest, then only (1,1) survives
        let (x, t) = run_struct(&def, &Utilities::new(vec![0.1, 0.5, 0.2, 0.9]).unwrap()).unwrap();
        assert_eq!(x.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(t.winners().collect::<Vec<_>>(), vec![0, 3]);
        assert!(def.validate(&x).is_ok());
        assert!(def.validate(&MatchingValue { pairs: vec![(0, 0), (1, 0)] }).is_err());
    }
}
