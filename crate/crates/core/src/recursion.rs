//! The generic recursion over exponential utilities and its companions.
//!
//! A [`Structure`] supplies four subroutines (`stop`, `split`, `map`,
//! `combine`) over key sets and an auxiliary state. [`run_struct`] runs the
//! recursion: at every level it splits the live keys into disjoint
//! partitions, takes the argmin of each partition, subtracts the partition
//! minimum from its members, and recurses on the smaller key set returned by
//! `map`. The winners of every level form the [`Trace`].
//!
//! Because the subroutines never see utility values, the trace is a sequence
//! of categorical events whose probabilities are ratios of rates, and the
//! utilities conditioned on the trace are sums of independent exponentials.
//! [`trace_log_prob`] and [`cond_sample`] are built on that.
//!
//! All recursions are unrolled into an explicit level stack.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::perturb::{check_len, unit_exponential, Key, ThetaVector, Utilities};
use crate::scalar::{log_sum_exp, Scalar};

/// First violated invariant of a structure value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A recursive algorithm with the stochastic invariant.
///
/// Key sets are passed as ascending slices of dense key indices. None of the
/// methods receives utilities, so the output can depend on them only through
/// the argmin winners.
pub trait Structure: Sync {
    /// Auxiliary state threaded through the recursion.
    type Aux: Clone + Send + Sync;
    /// Structure produced by the algorithm.
    type Value: Clone + fmt::Debug + PartialEq + Send + Sync;

    /// Size of the key universe; keys are `0..num_keys()`.
    fn num_keys(&self) -> usize;

    /// Root call arguments `(K, R)`.
    fn initial(&self) -> (Vec<Key>, Self::Aux);

    /// Must return `true` for an empty key set.
    fn stop(&self, keys: &[Key], aux: &Self::Aux) -> bool;

    /// Disjoint nonempty partitions covering `keys` exactly, in a
    /// deterministic order.
    fn split(&self, keys: &[Key], aux: &Self::Aux) -> Vec<Vec<Key>>;

    /// Strict subset of `keys` (ascending) and the next auxiliary state.
    fn map(&self, keys: &[Key], aux: &Self::Aux, winners: &[Key]) -> (Vec<Key>, Self::Aux);

    /// Output of a call that stops immediately.
    fn leaf(&self, keys: &[Key], aux: &Self::Aux) -> Self::Value;

    fn combine(
        &self,
        child: Self::Value,
        keys: &[Key],
        aux: &Self::Aux,
        winners: &[Key],
    ) -> Self::Value;

    /// Checks the invariants of a finished structure.
    fn validate(&self, value: &Self::Value) -> std::result::Result<(), Violation>;

    /// Stable textual encoding, used as a key for structure marginals.
    fn canonical(&self, value: &Self::Value) -> String;

    /// Indicator features of a structure; the Hamming loss is the size of
    /// the symmetric difference of two feature sets.
    fn features(&self, value: &Self::Value) -> Vec<usize>;

    /// Human-readable key name.
    fn key_label(&self, key: Key) -> String {
        key.to_string()
    }
}

/// One argmin event: the partition position at its level and the winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TraceEvent {
    pub partition: usize,
    pub winner: Key,
}

/// Winners of every recursion level, aligned with the partition order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trace {
    levels: Vec<Vec<TraceEvent>>,
}

impl Trace {
    pub fn new(levels: Vec<Vec<TraceEvent>>) -> Self {
        Self { levels }
    }

    /// Builds a trace whose partition indices are the positions within each level.
    pub fn from_winners(levels: Vec<Vec<Key>>) -> Self {
        Self::new(
            levels
                .into_iter()
                .map(|ws| {
                    ws.into_iter()
                        .enumerate()
                        .map(|(partition, winner)| TraceEvent { partition, winner })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn levels(&self) -> &[Vec<TraceEvent>] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// All winners, level by level.
    pub fn winners(&self) -> impl Iterator<Item = Key> + '_ {
        self.levels.iter().flatten().map(|e| e.winner)
    }

    pub fn push_level(&mut self, winners: &[Key]) {
        self.levels.push(
            winners
                .iter()
                .enumerate()
                .map(|(partition, &winner)| TraceEvent { partition, winner })
                .collect(),
        );
    }

    pub fn pop_level(&mut self) -> Option<Vec<TraceEvent>> {
        self.levels.pop()
    }
}

/// One unrolled recursion level.
#[derive(Debug, Clone)]
pub struct Level<A> {
    pub keys: Vec<Key>,
    pub aux: A,
    pub partitions: Vec<Vec<Key>>,
    pub winners: Vec<Key>,
}

/// Calls `split` and checks the partition contract.
pub fn checked_split<D: Structure + ?Sized>(
    def: &D,
    keys: &[Key],
    aux: &D::Aux,
    stamp: &mut [u32],
    epoch: u32,
) -> Result<Vec<Vec<Key>>> {
    let parts = def.split(keys, aux);
    let mut covered = 0usize;
    for (i, p) in parts.iter().enumerate() {
        if p.is_empty() {
            return Err(Error::StructureDefinition(format!(
                "split produced an empty partition at position {i}"
            )));
        }
        for &k in p {
            if k >= stamp.len() || stamp[k] != epoch {
                return Err(Error::StructureDefinition(format!(
                    "partition {i} contains key {k} which is not live or repeats"
                )));
            }
            stamp[k] = epoch + 1;
            covered += 1;
        }
    }
    if covered != keys.len() {
        return Err(Error::StructureDefinition(format!(
            "partitions cover {covered} of {} live keys",
            keys.len()
        )));
    }
    Ok(parts)
}

fn mark_live(keys: &[Key], stamp: &mut [u32], epoch: u32) -> Result<()> {
    for &k in keys {
        if k >= stamp.len() {
            return Err(Error::StructureDefinition(format!(
                "key {k} outside the key universe of size {}",
                stamp.len()
            )));
        }
        stamp[k] = epoch;
    }
    Ok(())
}

fn check_shrink(keys: &[Key], next: &[Key]) -> Result<()> {
    if next.len() >= keys.len() {
        return Err(Error::StructureDefinition(format!(
            "map must shrink the key set ({} -> {})",
            keys.len(),
            next.len()
        )));
    }
    let mut it = keys.iter();
    for (pos, k) in next.iter().enumerate() {
        if pos > 0 && next[pos - 1] >= *k {
            return Err(Error::StructureDefinition("map output is not ascending".into()));
        }
        if !it.any(|x| x == k) {
            return Err(Error::StructureDefinition(format!(
                "map output contains key {k} that is not live"
            )));
        }
    }
    Ok(())
}

/// Argmin with ties broken towards the lowest key.
fn argmin<S: Scalar>(part: &[Key], e: &[S]) -> Key {
    let mut best = part[0];
    for &k in &part[1..] {
        if e[k] < e[best] || (e[k] == e[best] && k < best) {
            best = k;
        }
    }
    best
}

/// Runs the recursion from the definition's root arguments.
pub fn run_struct<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    e: &Utilities<S>,
) -> Result<(D::Value, Trace)> {
    let (keys, aux) = def.initial();
    run_struct_at(def, e, keys, aux)
}

/// Runs the recursion on explicit `(K, R)`; returns the structure and its trace.
pub fn run_struct_at<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    e: &Utilities<S>,
    keys: Vec<Key>,
    aux: D::Aux,
) -> Result<(D::Value, Trace)> {
    let n = def.num_keys();
    check_len(n, e.len(), "utilities")?;
    let mut work = e.values().to_vec();
    let mut stamp = vec![0u32; n];
    let mut epoch = 1u32;
    let mut stack: Vec<(Vec<Key>, D::Aux, Vec<Key>)> = Vec::new();
    let mut trace = Trace::default();
    let (mut keys, mut aux) = (keys, aux);

    while !def.stop(&keys, &aux) {
        mark_live(&keys, &mut stamp, epoch)?;
        let parts = checked_split(def, &keys, &aux, &mut stamp, epoch)?;
        epoch += 2;
        let mut winners = Vec::with_capacity(parts.len());
        for p in &parts {
            let w = argmin(p, &work);
            let m = work[w];
            for &k in p {
                work[k] -= m;
            }
            work[w] = S::zero();
            winners.push(w);
        }
        let (next_keys, next_aux) = def.map(&keys, &aux, &winners);
        check_shrink(&keys, &next_keys)?;
        trace.push_level(&winners);
        stack.push((keys, aux, winners));
        keys = next_keys;
        aux = next_aux;
    }

    let mut value = def.leaf(&keys, &aux);
    while let Some((k, a, w)) = stack.pop() {
        value = def.combine(value, &k, &a, &w);
    }
    Ok((value, trace))
}

/// Levels of a replayed trace, plus the final `(K, R)`.
pub type Replayed<A> = (Vec<Level<A>>, Vec<Key>, A);

/// Replays the control flow driven by `trace`, checking feasibility.
/// Returns every non-stopping level plus the final `(K, R)` at which the
/// recursion stops.
pub fn replay_levels<D: Structure + ?Sized>(
    def: &D,
    trace: &Trace,
    keys: Vec<Key>,
    aux: D::Aux,
) -> Result<Replayed<D::Aux>> {
    let n = def.num_keys();
    let mut stamp = vec![0u32; n];
    let mut epoch = 1u32;
    let mut levels = Vec::with_capacity(trace.depth());
    let (mut keys, mut aux) = (keys, aux);
    let mut depth = 0usize;

    while !def.stop(&keys, &aux) {
        let Some(events) = trace.levels().get(depth) else {
            return Err(Error::InvalidTrace(format!(
                "trace has {} levels but the recursion continues",
                trace.depth()
            )));
        };
        mark_live(&keys, &mut stamp, epoch)?;
        let parts = checked_split(def, &keys, &aux, &mut stamp, epoch)?;
        epoch += 2;
        if events.len() != parts.len() {
            return Err(Error::InvalidTrace(format!(
                "level {depth} has {} events for {} partitions",
                events.len(),
                parts.len()
            )));
        }
        let mut winners = Vec::with_capacity(parts.len());
        for (i, (ev, p)) in events.iter().zip(&parts).enumerate() {
            if ev.partition != i {
                return Err(Error::InvalidTrace(format!(
                    "level {depth} event {i} records partition {}",
                    ev.partition
                )));
            }
            if !p.contains(&ev.winner) {
                return Err(Error::InvalidTrace(format!(
                    "level {depth}: winner {} is not in partition {i}",
                    ev.winner
                )));
            }
            winners.push(ev.winner);
        }
        let (next_keys, next_aux) = def.map(&keys, &aux, &winners);
        check_shrink(&keys, &next_keys)?;
        levels.push(Level { keys, aux, partitions: parts, winners });
        keys = next_keys;
        aux = next_aux;
        depth += 1;
    }
    if depth != trace.depth() {
        return Err(Error::InvalidTrace(format!(
            "recursion stops after {depth} levels but the trace has {}",
            trace.depth()
        )));
    }
    Ok((levels, keys, aux))
}

/// Classification of one event under the current mask state.
enum EventKind {
    /// No masked key in the partition.
    Stochastic,
    /// The unique masked key of the partition wins.
    Forced,
    /// A masked key is present but does not win.
    Impossible,
}

fn classify(part: &[Key], winner: Key, masked: &[bool]) -> Result<EventKind> {
    let mut found = None;
    for &k in part {
        if masked[k] {
            if found.is_some() {
                return Err(Error::StructureDefinition(format!(
                    "partition {part:?} contains two deterministic keys"
                )));
            }
            found = Some(k);
        }
    }
    Ok(match found {
        None => EventKind::Stochastic,
        Some(k) if k == winner => EventKind::Forced,
        Some(_) => EventKind::Impossible,
    })
}

/// `log p(T = t; θ)` from the definition's root arguments.
pub fn trace_log_prob<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    trace: &Trace,
    theta: &ThetaVector<S>,
) -> Result<S> {
    let (keys, aux) = def.initial();
    trace_log_prob_at(def, trace, theta, keys, aux)
}

/// `log p(T = t; θ)`: the sum over events of `log λ_t - log Σ_P λ`, with
/// winners masked at deeper levels. Returns `-∞` for a feasible but
/// impossible trace (a masked key loses).
pub fn trace_log_prob_at<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    trace: &Trace,
    theta: &ThetaVector<S>,
    keys: Vec<Key>,
    aux: D::Aux,
) -> Result<S> {
    check_len(def.num_keys(), theta.len(), "theta")?;
    let (levels, _, _) = replay_levels(def, trace, keys, aux)?;
    let th = theta.theta();
    let mut masked = theta.mask().to_vec();
    let mut total = S::zero();
    for level in &levels {
        for (p, &w) in level.partitions.iter().zip(&level.winners) {
            match classify(p, w, &masked)? {
                EventKind::Stochastic => {
                    total += -th[w] - log_sum_exp(p.iter().map(|&k| -th[k]));
                }
                EventKind::Forced => {}
                EventKind::Impossible => total = S::neg_infinity(),
            }
        }
        for &w in &level.winners {
            masked[w] = true;
        }
    }
    Ok(total)
}

/// `∇_θ log p(T = t; θ)` from the definition's root arguments.
pub fn trace_score<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    trace: &Trace,
    theta: &ThetaVector<S>,
) -> Result<Vec<S>> {
    let (keys, aux) = def.initial();
    trace_score_at(def, trace, theta, keys, aux)
}

/// `∇_θ log p(T = t; θ)`. Each stochastic event with partition `P` and
/// winner `w` adds `softmax(-θ_P)` over `P` and `-1` at `w`.
pub fn trace_score_at<D: Structure + ?Sized, S: Scalar>(
    def: &D,
    trace: &Trace,
    theta: &ThetaVector<S>,
    keys: Vec<Key>,
    aux: D::Aux,
) -> Result<Vec<S>> {
    check_len(def.num_keys(), theta.len(), "theta")?;
    let (levels, _, _) = replay_levels(def, trace, keys, aux)?;
    score_from_levels(&levels, theta)
}

pub(crate) fn score_from_levels<A, S: Scalar>(
    levels: &[Level<A>],
    theta: &ThetaVector<S>,
) -> Result<Vec<S>> {
    let th = theta.theta();
    let mut masked = theta.mask().to_vec();
    let mut grad = vec![S::zero(); th.len()];
    for level in levels {
        for (p, &w) in level.partitions.iter().zip(&level.winners) {
            match classify(p, w, &masked)? {
                EventKind::Stochastic => {
                    let lse = log_sum_exp(p.iter().map(|&k| -th[k]));
                    for &k in p {
                        grad[k] += (-th[k] - lse).exp();
                    }
                    grad[w] -= S::one();
                }
                EventKind::Forced => {}
                EventKind::Impossible => {
                    return Err(Error::InvalidTrace(
                        "trace has probability zero; its score is undefined".into(),
                    ))
                }
            }
        }
        for &w in &level.winners {
            masked[w] = true;
        }
    }
    Ok(grad)
}

/// One argmin event of a conditional sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CondEvent<S> {
    pub winner: Key,
    /// Unit-exponential draw; the event minimum is `noise / Σ_{sum_keys} λ`.
    pub noise: S,
    /// The partition at this level.
    pub partition: Vec<Key>,
    /// Members of the partition with finite rate at this level.
    pub sum_keys: Vec<Key>,
    /// The partition holds a masked key, so the minimum is exactly `0`.
    pub deterministic: bool,
}

/// A residual `E'_k ~ Exp(λ'_k)` drawn for a key leaving the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual<S> {
    pub key: Key,
    pub noise: S,
    /// `λ'_k = +∞` at that point, so the residual is `0`.
    pub masked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondLevel<S> {
    pub events: Vec<CondEvent<S>>,
    /// Keys in `K \ K'` at this level.
    pub residuals: Vec<Residual<S>>,
}

/// All noise consumed by [`cond_sample`], organized so that the sample can
/// be replayed under any `θ` and differentiated.
///
/// Every utility is a sum of terms `ε / s` where `s` is either a partition
/// rate sum or a single rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CondBuildRecord<S> {
    num_keys: usize,
    levels: Vec<CondLevel<S>>,
    /// Keys still live when the recursion stops, and keys outside the root
    /// key set: free exponentials.
    tail: Vec<Residual<S>>,
}

impl<S: Scalar> CondBuildRecord<S> {
    pub fn num_keys(&self) -> usize {
        self.num_keys
    }

    pub fn levels(&self) -> &[CondLevel<S>] {
        &self.levels
    }

    pub fn tail(&self) -> &[Residual<S>] {
        &self.tail
    }

    /// Rebuilds the utilities from the stored noise under `theta`, undoing
    /// the minimum subtraction from the deepest level upwards.
    pub fn replay(&self, theta: &ThetaVector<S>) -> Result<Utilities<S>> {
        check_len(self.num_keys, theta.len(), "theta")?;
        let th = theta.theta();
        let residual = |r: &Residual<S>| if r.masked { S::zero() } else { r.noise * th[r.key].exp() };
        let mut e = vec![S::zero(); self.num_keys];
        for r in &self.tail {
            e[r.key] = residual(r);
        }
        for level in self.levels.iter().rev() {
            for r in &level.residuals {
                e[r.key] = residual(r);
            }
            for ev in &level.events {
                let m = if ev.deterministic {
                    S::zero()
                } else {
                    ev.noise / ev.sum_keys.iter().map(|&k| (-th[k]).exp()).sum::<S>()
                };
                for &k in &ev.partition {
                    if k == ev.winner {
                        e[k] = m;
                    } else {
                        e[k] += m;
                    }
                }
            }
        }
        Ok(Utilities::from_raw(e))
    }
}

/// Samples `E | T = t` from the definition's root arguments.
pub fn cond_sample<D: Structure + ?Sized, S: Scalar, R: Rng + ?Sized>(
    def: &D,
    trace: &Trace,
    theta: &ThetaVector<S>,
    rng: &mut R,
) -> Result<(Utilities<S>, CondBuildRecord<S>)> {
    let (keys, aux) = def.initial();
    cond_sample_at(def, trace, theta, keys, aux, rng)
}

/// Samples utilities conditioned on the trace: each event minimum is drawn
/// from `Exp(Σ_P λ)`, keys dropped by `map` get fresh `Exp(λ')` residuals,
/// and the minima are added back level by level.
///
/// Draw order: per level, one draw per event then one per dropped key (in
/// key order); finally one per tail key.
pub fn cond_sample_at<D: Structure + ?Sized, S: Scalar, R: Rng + ?Sized>(
    def: &D,
    trace: &Trace,
    theta: &ThetaVector<S>,
    keys: Vec<Key>,
    aux: D::Aux,
    rng: &mut R,
) -> Result<(Utilities<S>, CondBuildRecord<S>)> {
    let n = def.num_keys();
    check_len(n, theta.len(), "theta")?;
    let root_keys = keys.clone();
    let (levels, last_keys, _) = replay_levels(def, trace, keys, aux)?;
    let mut masked = theta.mask().to_vec();
    let mut rec_levels = Vec::with_capacity(levels.len());

    for (j, level) in levels.iter().enumerate() {
        let mut events = Vec::with_capacity(level.partitions.len());
        for (p, &w) in level.partitions.iter().zip(&level.winners) {
            let deterministic = match classify(p, w, &masked)? {
                EventKind::Stochastic => false,
                EventKind::Forced => true,
                EventKind::Impossible => {
                    return Err(Error::InvalidTrace(
                        "cannot condition on a trace of probability zero".into(),
                    ))
                }
            };
            let sum_keys = p.iter().copied().filter(|&k| !masked[k]).collect();
            events.push(CondEvent {
                winner: w,
                noise: S::lit(unit_exponential(rng)),
                partition: p.clone(),
                sum_keys,
                deterministic,
            });
        }
        for &w in &level.winners {
            masked[w] = true;
        }
        let next_keys: &[Key] = levels.get(j + 1).map(|l| l.keys.as_slice()).unwrap_or(&last_keys);
        let residuals = sorted_difference(&level.keys, next_keys)
            .map(|k| Residual { key: k, noise: S::lit(unit_exponential(rng)), masked: masked[k] })
            .collect();
        rec_levels.push(CondLevel { events, residuals });
    }

    let mut in_root = vec![false; n];
    for &k in &root_keys {
        in_root[k] = true;
    }
    let mut tail_keys: Vec<Key> = last_keys.clone();
    tail_keys.extend((0..n).filter(|&k| !in_root[k]));
    tail_keys.sort_unstable();
    let tail = tail_keys
        .into_iter()
        .map(|k| Residual { key: k, noise: S::lit(unit_exponential(rng)), masked: masked[k] })
        .collect();

    let rec = CondBuildRecord { num_keys: n, levels: rec_levels, tail };
    let e = rec.replay(theta)?;
    Ok((e, rec))
}

fn sorted_difference<'a>(a: &'a [Key], b: &'a [Key]) -> impl Iterator<Item = Key> + 'a {
    let mut j = 0;
    a.iter().copied().filter(move |&k| {
        while j < b.len() && b[j] < k {
            j += 1;
        }
        !(j < b.len() && b[j] == k)
    })
}

/// `vᵀ ∂ẽ/∂θ` for a conditional sample, by reverse accumulation through
/// [`CondBuildRecord::replay`].
///
/// A partition term `ε/s` has derivative `(ε/s)·λ_q/s` in `θ_q` for every
/// finite-rate member `q`; a residual `ε/λ_k` has derivative `ε/λ_k` in `θ_k`.
pub fn cond_jacobian_vjp<S: Scalar>(
    rec: &CondBuildRecord<S>,
    theta: &ThetaVector<S>,
    v: &[S],
) -> Result<Vec<S>> {
    check_len(rec.num_keys, theta.len(), "theta")?;
    check_len(rec.num_keys, v.len(), "cotangent")?;
    let th = theta.theta();
    let mut adj = v.to_vec();
    let mut grad = vec![S::zero(); rec.num_keys];

    for level in &rec.levels {
        for ev in &level.events {
            let mut a_m = S::zero();
            for &k in &ev.partition {
                a_m += adj[k];
            }
            adj[ev.winner] = S::zero();
            if ev.deterministic {
                continue;
            }
            let s: S = ev.sum_keys.iter().map(|&k| (-th[k]).exp()).sum();
            let m = ev.noise / s;
            for &q in &ev.sum_keys {
                grad[q] += a_m * m * (-th[q]).exp() / s;
            }
        }
        for r in &level.residuals {
            if !r.masked {
                grad[r.key] += adj[r.key] * r.noise * th[r.key].exp();
            }
            adj[r.key] = S::zero();
        }
    }
    for r in &rec.tail {
        if !r.masked {
            grad[r.key] += adj[r.key] * r.noise * th[r.key].exp();
        }
    }
    Ok(grad)
}
