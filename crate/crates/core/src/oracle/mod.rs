//! Brute-force ground truth for small instances.
//!
//! [`enumerate`] walks the recursion's control flow and branches over every
//! possible winner of every stochastic event, so each leaf is one trace with
//! its exact probability. Event probabilities are computed here directly as
//! `λ_t / Σ_P λ` from plain rate sums, independently of the max-shifted
//! log-sum-exp used by [`trace_log_prob`](crate::recursion::trace_log_prob).

mod stats;

pub use stats::{bootstrap_variance_le, chi_square_counts, ks_exponential, BootstrapOutcome};

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::perturb::{check_len, Key, ThetaVector};
use crate::recursion::{checked_split, trace_score, Structure, Trace};
use crate::scalar::Scalar;

/// Default cap on the number of enumerated traces.
pub const DEFAULT_MAX_TRACES: usize = 1_000_000;

/// One enumerated trace.
#[derive(Debug, Clone)]
pub struct EnumEntry<V, S> {
    pub trace: Trace,
    pub prob: S,
    pub value: V,
    /// [`Structure::canonical`] of `value`.
    pub canonical: String,
}

/// Exhaustive distribution over traces, with structure marginals.
#[derive(Debug, Clone)]
pub struct EnumeratedDistribution<V, S> {
    pub entries: Vec<EnumEntry<V, S>>,
    pub structure_marginals: BTreeMap<String, S>,
}

impl<V, S: Scalar> EnumeratedDistribution<V, S> {
    pub fn total_prob(&self) -> S {
        self.entries.iter().map(|e| e.prob).sum()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Probability of `trace`, or `None` outside the support.
    pub fn prob_of(&self, trace: &Trace) -> Option<S> {
        self.entries.iter().find(|e| &e.trace == trace).map(|e| e.prob)
    }

    /// Index from trace to entry position.
    pub fn index(&self) -> HashMap<Trace, usize> {
        self.entries.iter().enumerate().map(|(i, e)| (e.trace.clone(), i)).collect()
    }
}

struct Walker<'a, D: Structure + ?Sized, S, F> {
    def: &'a D,
    theta: &'a [S],
    cap: usize,
    count: usize,
    stamp: Vec<u32>,
    epoch: u32,
    frames: Vec<(Vec<Key>, D::Aux)>,
    path: Vec<Vec<Key>>,
    on_leaf: F,
}

impl<D, S, F> Walker<'_, D, S, F>
where
    D: Structure + ?Sized,
    S: Scalar,
    F: FnMut(&[Vec<Key>], S, D::Value),
{
    fn visit(&mut self, keys: Vec<Key>, aux: D::Aux, masked: &mut Vec<bool>, log_p: S) -> Result<()> {
        if self.def.stop(&keys, &aux) {
            if self.count == self.cap {
                return Err(Error::InstanceTooLarge { reached: self.count + 1, cap: self.cap });
            }
            self.count += 1;
            let mut value = self.def.leaf(&keys, &aux);
            for ((k, a), w) in self.frames.iter().zip(&self.path).rev() {
                value = self.def.combine(value, k, a, w);
            }
            (self.on_leaf)(&self.path, log_p.exp(), value);
            return Ok(());
        }

        for &k in &keys {
            self.stamp[k] = self.epoch;
        }
        let parts = checked_split(self.def, &keys, &aux, &mut self.stamp, self.epoch)?;
        self.epoch += 2;

        // options per partition: (winner, log factor)
        let mut options: Vec<Vec<(Key, S)>> = Vec::with_capacity(parts.len());
        for p in &parts {
            let forced: Vec<Key> = p.iter().copied().filter(|&k| masked[k]).collect();
            match forced.len() {
                0 => {
                    let rates: Vec<S> = p.iter().map(|&k| (-self.theta[k]).exp()).collect();
                    let total: S = rates.iter().copied().sum();
                    options.push(p.iter().zip(&rates).map(|(&k, &r)| (k, r.ln() - total.ln())).collect());
                }
                1 => options.push(vec![(forced[0], S::zero())]),
                _ => {
                    return Err(Error::StructureDefinition(format!(
                        "partition {p:?} contains two deterministic keys"
                    )))
                }
            }
        }

        self.frames.push((keys, aux));
        let mut choice = vec![0usize; options.len()];
        let res = loop {
            let winners: Vec<Key> = options.iter().zip(&choice).map(|(o, &c)| o[c].0).collect();
            let step: S = options.iter().zip(&choice).map(|(o, &c)| o[c].1).sum();
            let (keys, aux) = self.frames.last().expect("pushed above");
            let (next_keys, next_aux) = self.def.map(keys, aux, &winners);
            if next_keys.len() >= keys.len() {
                break Err(Error::StructureDefinition("map must shrink the key set".into()));
            }
            let newly: Vec<Key> = winners.iter().copied().filter(|&w| !masked[w]).collect();
            for &w in &newly {
                masked[w] = true;
            }
            self.path.push(winners);
            let res = self.visit(next_keys, next_aux, masked, log_p + step);
            self.path.pop();
            for &w in &newly {
                masked[w] = false;
            }
            if res.is_err() {
                break res;
            }

            let mut pos = 0;
            while pos < choice.len() {
                choice[pos] += 1;
                if choice[pos] < options[pos].len() {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
            if pos == choice.len() {
                break Ok(());
            }
        };
        self.frames.pop();
        res
    }
}

/// Calls `f(winners per level, probability, structure)` for every trace
/// reachable from `(K, R)`, in a fixed depth-first order. Fails once more
/// than `max_traces` traces exist.
pub fn for_each_trace<D, S, F>(
    def: &D,
    theta: &ThetaVector<S>,
    keys: Vec<Key>,
    aux: D::Aux,
    max_traces: usize,
    f: F,
) -> Result<()>
where
    D: Structure + ?Sized,
    S: Scalar,
    F: FnMut(&[Vec<Key>], S, D::Value),
{
    check_len(def.num_keys(), theta.len(), "theta")?;
    let mut walker = Walker {
        def,
        theta: theta.theta(),
        cap: max_traces,
        count: 0,
        stamp: vec![0; def.num_keys()],
        epoch: 1,
        frames: Vec::new(),
        path: Vec::new(),
        on_leaf: f,
    };
    let mut masked = theta.mask().to_vec();
    walker.visit(keys, aux, &mut masked, S::zero())
}

/// Enumerates every trace from the definition's root arguments.
pub fn enumerate<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    theta: &ThetaVector<S>,
    max_traces: usize,
) -> Result<EnumeratedDistribution<D::Value, S>> {
    let (keys, aux) = def.initial();
    enumerate_at(def, theta, keys, aux, max_traces)
}

/// Enumerates every trace reachable from `(K, R)` with its probability and
/// structure. Fails once more than `max_traces` traces exist.
pub fn enumerate_at<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    theta: &ThetaVector<S>,
    keys: Vec<Key>,
    aux: D::Aux,
    max_traces: usize,
) -> Result<EnumeratedDistribution<D::Value, S>> {
    let mut entries = Vec::new();
    for_each_trace(def, theta, keys, aux, max_traces, |path, prob, value| {
        let canonical = def.canonical(&value);
        entries.push(EnumEntry { trace: Trace::from_winners(path.to_vec()), prob, value, canonical });
    })?;
    let mut structure_marginals = BTreeMap::new();
    for e in &entries {
        *structure_marginals.entry(e.canonical.clone()).or_insert(S::zero()) += e.prob;
    }
    Ok(EnumeratedDistribution { entries, structure_marginals })
}

/// `E[L(X)]` by enumeration, without materializing the distribution.
pub fn exact_expected_loss<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    theta: &ThetaVector<S>,
    max_traces: usize,
    loss: impl Fn(&D::Value) -> S,
) -> Result<S> {
    let (keys, aux) = def.initial();
    let mut total = S::zero();
    for_each_trace(def, theta, keys, aux, max_traces, |_, p, x| total += p * loss(&x))?;
    Ok(total)
}

/// `Σ_t p(t) L(X(t))`.
pub fn expected_loss<V, S: Scalar>(dist: &EnumeratedDistribution<V, S>, loss: impl Fn(&V) -> S) -> S {
    dist.entries.iter().map(|e| e.prob * loss(&e.value)).sum()
}

/// `Σ_t p(t) L(X(t)) ∇_θ log p(t)`, the exact gradient of the expected loss.
pub fn exact_gradient<D: Structure + ?Sized, S: Scalar>(
    dist: &EnumeratedDistribution<D::Value, S>,
    def: &D,
    theta: &ThetaVector<S>,
    loss: impl Fn(&D::Value) -> S,
) -> Result<Vec<S>> {
    let mut grad = vec![S::zero(); theta.len()];
    for e in &dist.entries {
        let l = loss(&e.value);
        let score = trace_score(def, &e.trace, theta)?;
        for (g, s) in grad.iter_mut().zip(score) {
            *g += e.prob * l * s;
        }
    }
    Ok(grad)
}

/// Pearson chi-square of observed trace counts against the enumerated
/// probabilities, with low-expectation cells pooled.
pub fn chi_square_fit<V, S: Scalar>(
    observed: &HashMap<Trace, u64>,
    dist: &EnumeratedDistribution<V, S>,
) -> Result<(f64, f64)> {
    let index = dist.index();
    let mut counts = vec![0u64; dist.len()];
    for (t, &c) in observed {
        let Some(&i) = index.get(t) else {
            return Err(Error::InvalidArgument(format!("observed trace {t:?} is outside the enumerated support")));
        };
        counts[i] += c;
    }
    let probs: Vec<f64> = dist.entries.iter().map(|e| e.prob.as_f64()).collect();
    chi_square_counts(&counts, &probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{top_k_def, Graph, kruskal_def};

    #[test]
    fn top_k_uniform() {
        let def = top_k_def(3, 2).unwrap();
        let d = enumerate(&def, &ThetaVector::<f64>::constant(3, 0.0).unwrap(), DEFAULT_MAX_TRACES).unwrap();
        assert_eq!(d.len(), 6);
        for e in &d.entries {
            assert!((e.prob - 1.0 / 6.0).abs() < 1e-15);
        }
        assert_eq!(d.structure_marginals.len(), 3);
        for p in d.structure_marginals.values() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn kruskal_triangle() {
        let def = kruskal_def(Graph::new(3, vec![(0, 1), (1, 2), (0, 2)], false).unwrap()).unwrap();
        let d = enumerate(&def, &ThetaVector::<f64>::constant(3, 0.0).unwrap(), 100).unwrap();
        assert_eq!(d.len(), 6);
        assert_eq!(d.structure_marginals.len(), 3);
        let t = Trace::from_winners(vec![vec![0], vec![2]]);
        assert!((d.prob_of(&t).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((d.structure_marginals["0-1;0-2"] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn streaming_expected_loss_matches_distribution() {
        let def = kruskal_def(Graph::complete_undirected(4)).unwrap();
        let th = ThetaVector::<f64>::new((0..6).map(|k| 0.3 * k as f64 - 0.7).collect()).unwrap();
        let loss = |x: &crate::structures::SpanningTreeValue| x.edges.iter().sum::<usize>() as f64;
        let d = enumerate(&def, &th, DEFAULT_MAX_TRACES).unwrap();
        let a = expected_loss(&d, loss);
        let b = exact_expected_loss(&def, &th, DEFAULT_MAX_TRACES, loss).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let def = top_k_def(4, 4).unwrap();
        let err = enumerate(&def, &ThetaVector::<f64>::constant(4, 0.0).unwrap(), 10).unwrap_err();
        assert_eq!(err, Error::InstanceTooLarge { reached: 11, cap: 10 });
    }

    #[test]
    fn exact_gradient_two_items() {
        let def = top_k_def(2, 1).unwrap();
        let th = ThetaVector::<f64>::constant(2, 0.0).unwrap();
        let d = enumerate(&def, &th, 10).unwrap();
        let g = exact_gradient(&d, &def, &th, |x| if x.items == [0] { 1.0 } else { 0.0 }).unwrap();
        assert!((g[0] + 0.25).abs() < 1e-15 && (g[1] - 0.25).abs() < 1e-15);
        let g0 = exact_gradient(&d, &def, &th, |_| 3.0).unwrap();
        assert!(g0.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn chi_square_support_mismatch() {
        let def = top_k_def(2, 1).unwrap();
        let d = enumerate(&def, &ThetaVector::<f64>::constant(2, 0.0).unwrap(), 10).unwrap();
        let mut obs = HashMap::new();
        obs.insert(Trace::from_winners(vec![vec![0], vec![1]]), 3);
        assert!(matches!(chi_square_fit(&obs, &d), Err(Error::InvalidArgument(_))));
    }
}
