//! Score-function gradient estimators of `∇_θ E[L(X)]`.
//!
//! Every estimator draws sample `i` from its own stream
//! [`SeedStream::rng(i)`](crate::rng::SeedStream::rng), evaluates samples in
//! parallel chunks and merges the chunks in index order, so results do not
//! depend on thread scheduling.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::perturb::{reparam_diag, sample_utilities, ThetaVector, Utilities};
use crate::recursion::{cond_jacobian_vjp, cond_sample, run_struct, trace_score, Structure};
use crate::rng::{SeedStream, StreamRng};
use crate::scalar::Scalar;

const CHUNK: usize = 512;

/// Which score multiplies the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    /// `∇_θ log p(T = t)`.
    Trace,
    /// `∇_θ log p(E = e)`.
    Utility,
}

/// Seed and retention settings shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorOptions {
    pub seeds: SeedStream,
    pub retain_per_sample: bool,
}

impl EstimatorOptions {
    pub fn new(seed: u64) -> Self {
        Self { seeds: SeedStream::new(seed), retain_per_sample: false }
    }

    pub fn retain(mut self) -> Self {
        self.retain_per_sample = true;
        self
    }
}

impl From<SeedStream> for EstimatorOptions {
    fn from(seeds: SeedStream) -> Self {
        Self { seeds, retain_per_sample: false }
    }
}

/// Result of an estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport<S> {
    /// Mean of the per-sample contributions.
    pub gradient: Vec<S>,
    /// Per-coordinate unbiased sample variance of the contributions.
    pub variance: Vec<S>,
    /// Number of contributions averaged.
    pub contributions: usize,
    /// Loss evaluations spent (`K` per contribution for leave-one-out).
    pub samples_used: usize,
    pub per_sample: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> EstimatorReport<S> {
    /// Per-coordinate standard error of the mean.
    pub fn stderr(&self) -> Vec<S> {
        let n = S::lit(self.contributions as f64);
        self.variance.iter().map(|&v| (v / n).sqrt()).collect()
    }

    pub fn total_variance(&self) -> S {
        self.variance.iter().copied().sum()
    }
}

struct Moments<S> {
    n: usize,
    mean: Vec<S>,
    m2: Vec<S>,
    kept: Vec<Vec<S>>,
}

impl<S: Scalar> Moments<S> {
    fn new(dim: usize) -> Self {
        Self { n: 0, mean: vec![S::zero(); dim], m2: vec![S::zero(); dim], kept: Vec::new() }
    }

    fn push(&mut self, x: Vec<S>, keep: bool) {
        self.n += 1;
        let n = S::lit(self.n as f64);
        for ((m, q), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(&x) {
            let d = v - *m;
            *m += d / n;
            *q += d * (v - *m);
        }
        if keep {
            self.kept.push(x);
        }
    }

    fn merge(&mut self, other: Moments<S>) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = other;
            return;
        }
        let (na, nb) = (S::lit(self.n as f64), S::lit(other.n as f64));
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
        self.kept.extend(other.kept);
    }
}

/// Averages `f(i, rng_i)` over `i in 0..n`.
fn average<S, F>(n: usize, dim: usize, per_eval: usize, opts: EstimatorOptions, f: F) -> Result<EstimatorReport<S>>
where
    S: Scalar,
    F: Fn(&mut StreamRng) -> Result<Vec<S>> + Sync,
{
    if n == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    let chunks: Vec<Moments<S>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Moments::new(dim);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let x = f(&mut opts.seeds.rng(i as u64))?;
                acc.push(x, opts.retain_per_sample);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Moments::new(dim);
    for c in chunks {
        total.merge(c);
    }
    let denom = S::lit((total.n.max(2) - 1) as f64);
    Ok(EstimatorReport {
        gradient: total.mean,
        variance: total.m2.into_iter().map(|q| q / denom).collect(),
        contributions: n,
        samples_used: n * per_eval,
        per_sample: opts.retain_per_sample.then_some(total.kept),
    })
}

fn scaled<S: Scalar>(l: S, score: Vec<S>) -> Vec<S> {
    score.into_iter().map(|s| l * s).collect()
}

/// E-REINFORCE: mean of `L(X(e)) · ∇_θ log p(E = e)`.
pub fn grad_e_reinforce<D, S, L>(
    def: &D,
    theta: &ThetaVector<S>,
    loss: L,
    n_samples: usize,
    opts: impl Into<EstimatorOptions>,
) -> Result<EstimatorReport<S>>
where
    D: Structure + ?Sized,
    S: Scalar,
    L: Fn(&D::Value) -> S + Sync,
{
    average(n_samples, theta.len(), 1, opts.into(), |rng| {
        let e = sample_utilities(theta, rng);
        let (x, _) = run_struct(def, &e)?;
        Ok(scaled(loss(&x), theta.utility_score(&e)?))
    })
}

/// T-REINFORCE: mean of `L(X(t)) · ∇_θ log p(T = t)`.
pub fn grad_t_reinforce<D, S, L>(
    def: &D,
    theta: &ThetaVector<S>,
    loss: L,
    n_samples: usize,
    opts: impl Into<EstimatorOptions>,
) -> Result<EstimatorReport<S>>
where
    D: Structure + ?Sized,
    S: Scalar,
    L: Fn(&D::Value) -> S + Sync,
{
    average(n_samples, theta.len(), 1, opts.into(), |rng| {
        let e = sample_utilities(theta, rng);
        let (x, t) = run_struct(def, &e)?;
        Ok(scaled(loss(&x), trace_score(def, &t, theta)?))
    })
}

/// Leave-one-out estimator: each contribution draws `k` samples and returns
/// `1/(k-1) Σ_i (L_i - L̄) · score_i`. `n_batches` contributions are averaged,
/// spending `k · n_batches` evaluations.
pub fn grad_loo<D, S, L>(
    def: &D,
    theta: &ThetaVector<S>,
    loss: L,
    k: usize,
    space: Space,
    n_batches: usize,
    opts: impl Into<EstimatorOptions>,
) -> Result<EstimatorReport<S>>
where
    D: Structure + ?Sized,
    S: Scalar,
    L: Fn(&D::Value) -> S + Sync,
{
    if k < 2 {
        return Err(Error::InvalidParameter(format!("leave-one-out needs K >= 2, got {k}")));
    }
    let dim = theta.len();
    average(n_batches, dim, k, opts.into(), |rng| {
        let mut losses = Vec::with_capacity(k);
        let mut scores = Vec::with_capacity(k);
        for _ in 0..k {
            let e = sample_utilities(theta, rng);
            let (x, t) = run_struct(def, &e)?;
            losses.push(loss(&x));
            scores.push(match space {
                Space::Trace => trace_score(def, &t, theta)?,
                Space::Utility => theta.utility_score(&e)?,
            });
        }
        loo_combine(&losses, &scores, dim)
    })
}

/// The leave-one-out combination for one batch of losses and scores.
pub fn loo_combine<S: Scalar>(losses: &[S], scores: &[Vec<S>], dim: usize) -> Result<Vec<S>> {
    let k = losses.len();
    if k < 2 || scores.len() != k {
        return Err(Error::InvalidParameter(format!("leave-one-out needs K >= 2 matching scores, got {k}")));
    }
    let mut g = vec![S::zero(); dim];
    if losses.iter().all(|&l| l == losses[0]) {
        return Ok(g);
    }
    let mean = losses.iter().copied().sum::<S>() / S::lit(k as f64);
    for (&l, s) in losses.iter().zip(scores) {
        let w = l - mean;
        for (gi, &si) in g.iter_mut().zip(s) {
            *gi += w * si;
        }
    }
    let inv = S::one() / S::lit((k - 1) as f64);
    Ok(g.into_iter().map(|x| x * inv).collect())
}

/// A control variate `c(e)` with its gradient in utility space.
pub trait ControlVariate<S: Scalar>: Sync {
    /// `(c(e), ∂c/∂e)`.
    fn eval(&self, e: &[S]) -> (S, Vec<S>);

    /// Relative tolerance for the finite-difference gradient self-test.
    fn tolerance(&self) -> f64 {
        1e-5
    }
}

/// `c ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroCv;

impl<S: Scalar> ControlVariate<S> for ZeroCv {
    fn eval(&self, e: &[S]) -> (S, Vec<S>) {
        (S::zero(), vec![S::zero(); e.len()])
    }
}

/// `c(e) = Σ_k a_k e_k²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCv<S> {
    pub a: Vec<S>,
}

impl<S: Scalar> ControlVariate<S> for QuadraticCv<S> {
    fn eval(&self, e: &[S]) -> (S, Vec<S>) {
        let v = self.a.iter().zip(e).map(|(&a, &x)| a * x * x).sum();
        let g = self.a.iter().zip(e).map(|(&a, &x)| S::lit(2.0) * a * x).collect();
        (v, g)
    }
}

/// Checks `grad_e` against central finite differences at `probe`.
pub fn check_control_variate<S: Scalar>(cv: &dyn ControlVariate<S>, probe: &[S]) -> Result<()> {
    let (_, g) = cv.eval(probe);
    if g.len() != probe.len() {
        return Err(Error::InvalidControlVariate(format!(
            "gradient has {} entries for {} utilities",
            g.len(),
            probe.len()
        )));
    }
    let tol = cv.tolerance();
    let mut x: Vec<f64> = probe.iter().map(|v| v.as_f64()).collect();
    for k in 0..x.len() {
        let h = 1e-5 * x[k].abs().max(1.0);
        let orig = x[k];
        let at = |x: &[f64]| cv.eval(&x.iter().map(|&v| S::lit(v)).collect::<Vec<_>>()).0.as_f64();
        x[k] = orig + h;
        let up = at(&x);
        x[k] = orig - h;
        let dn = at(&x);
        x[k] = orig;
        let fd = (up - dn) / (2.0 * h);
        let an = g[k].as_f64();
        let close = (fd - an).abs() <= tol * fd.abs().max(an.abs()).max(1.0);
        if !close {
            return Err(Error::InvalidControlVariate(format!(
                "d c / d e[{k}] is {an} but finite differences give {fd}"
            )));
        }
    }
    Ok(())
}

fn probe_point<S: Scalar>(n: usize) -> Vec<S> {
    (0..n).map(|k| S::lit(0.5 + 0.37 * k as f64)).collect()
}

/// RELAX: `(L - c(ẽ))·∇log p(t) - ∇_θ c(ẽ) + ∇_θ c(e)` with `ẽ ~ E | T = t`
/// drawn with fresh noise from the same stream after `e`.
pub fn grad_relax<D, S, L>(
    def: &D,
    theta: &ThetaVector<S>,
    loss: L,
    cv: &dyn ControlVariate<S>,
    n_samples: usize,
    opts: impl Into<EstimatorOptions>,
) -> Result<EstimatorReport<S>>
where
    D: Structure + ?Sized,
    S: Scalar,
    L: Fn(&D::Value) -> S + Sync,
{
    check_control_variate(cv, &probe_point::<S>(theta.len()))?;
    average(n_samples, theta.len(), 1, opts.into(), |rng| {
        let e = sample_utilities(theta, rng);
        let (x, t) = run_struct(def, &e)?;
        let score = trace_score(def, &t, theta)?;
        let (e_tilde, rec) = cond_sample(def, &t, theta, rng)?;
        let (c_tilde, grad_tilde) = cv.eval(e_tilde.values());
        let (_, grad_e) = cv.eval(e.values());
        let through_tilde = cond_jacobian_vjp(&rec, theta, &grad_tilde)?;
        let through_e = reparam_path(&e, &grad_e);
        let w = loss(&x) - c_tilde;
        Ok(score
            .into_iter()
            .zip(through_tilde.into_iter().zip(through_e))
            .map(|(s, (a, b))| w * s - (a - b))
            .collect())
    })
}

fn reparam_path<S: Scalar>(e: &Utilities<S>, grad_e: &[S]) -> Vec<S> {
    reparam_diag(e).into_iter().zip(grad_e).map(|(d, &g)| d * g).collect()
}
