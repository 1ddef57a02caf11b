//! Exponential perturbations in θ-coordinates.
//!
//! Keys are dense indices `0..n`. Each key carries a log-location `θ_k`; the
//! rate of its exponential utility is `λ_k = exp(-θ_k)`. A key may instead be
//! *masked*, meaning `λ_k = +∞` and the utility is the constant `0`. The
//! mask is a separate boolean; infinite rates never enter floating-point
//! arithmetic.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense key index.
pub type Key = usize;

/// Rate of an exponential utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate<S> {
    Finite(S),
    /// `λ = +∞`: the utility is identically zero.
    Infinite,
}

impl<S: Scalar> Rate<S> {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Rate::Infinite)
    }

    pub fn finite(&self) -> Option<S> {
        match *self {
            Rate::Finite(l) => Some(l),
            Rate::Infinite => None,
        }
    }
}

/// Log-rate parameters `θ` over keys `0..n` plus the deterministic-winner mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector<S> {
    theta: Vec<S>,
    mask: Vec<bool>,
}

impl<S: Scalar> ThetaVector<S> {
    /// Unmasked parameters. Every entry must be finite.
    pub fn new(theta: Vec<S>) -> Result<Self> {
        let mask = vec![false; theta.len()];
        Self::with_mask(theta, mask)
    }

    /// Parameters with an explicit mask. Masked entries may hold any value;
    /// it is never read.
    pub fn with_mask(theta: Vec<S>, mask: Vec<bool>) -> Result<Self> {
        if theta.len() != mask.len() {
            return Err(Error::InvalidArgument(format!(
                "theta has {} entries but mask has {}",
                theta.len(),
                mask.len()
            )));
        }
        for (k, (&t, &m)) in theta.iter().zip(&mask).enumerate() {
            if !m && !t.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "theta[{k}] = {t} is not finite"
                )));
            }
        }
        Ok(Self { theta, mask })
    }

    /// `n` keys, all with `θ = value`.
    pub fn constant(n: usize, value: S) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[S] {
        &self.theta
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_masked(&self, k: Key) -> bool {
        self.mask[k]
    }

    pub fn get(&self, k: Key) -> S {
        self.theta[k]
    }

    /// Copy with `θ_k` replaced; used by finite-difference checks.
    pub fn with_value(&self, k: Key, value: S) -> Self {
        let mut out = self.clone();
        out.theta[k] = value;
        out
    }

    /// Copy with a constant added to every unmasked entry.
    pub fn shifted(&self, c: S) -> Self {
        let mut out = self.clone();
        for (t, &m) in out.theta.iter_mut().zip(&self.mask) {
            if !m {
                *t += c;
            }
        }
        out
    }

    /// `λ_k = exp(-θ_k)`; masked keys get [`Rate::Infinite`].
    pub fn rates(&self) -> Vec<Rate<S>> {
        self.theta
            .iter()
            .zip(&self.mask)
            .map(|(&t, &m)| if m { Rate::Infinite } else { Rate::Finite((-t).exp()) })
            .collect()
    }

    /// Gradient of `log p(E = e; θ)` with respect to `θ`:
    /// `-1 + e_k·λ_k` per unmasked key, `0` on masked keys.
    pub fn utility_score(&self, e: &Utilities<S>) -> Result<Vec<S>> {
        check_len(self.len(), e.len(), "utilities")?;
        Ok(self
            .theta
            .iter()
            .zip(&self.mask)
            .zip(e.values())
            .map(|((&t, &m), &ek)| if m { S::zero() } else { ek * (-t).exp() - S::one() })
            .collect())
    }
}

/// Validated [`ThetaVector::rates`].
pub fn rates_from_theta<S: Scalar>(theta: &ThetaVector<S>) -> Vec<Rate<S>> {
    theta.rates()
}

/// One exponential utility per key.
#[derive(Debug, Clone, PartialEq)]
pub struct Utilities<S> {
    values: Vec<S>,
}

impl<S: Scalar> Utilities<S> {
    /// Wraps raw values. Values must be nonnegative.
    pub fn new(values: Vec<S>) -> Result<Self> {
        if let Some((k, v)) = values.iter().enumerate().find(|(_, v)| v.is_nan() || **v < S::zero()) {
            return Err(Error::InvalidArgument(format!(
                "utility {k} = {v} is negative or NaN"
            )));
        }
        Ok(Self { values })
    }

    pub(crate) fn from_raw(values: Vec<S>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: Key) -> S {
        self.values[k]
    }

    pub fn into_vec(self) -> Vec<S> {
        self.values
    }
}

/// Draws `ε ~ Exp(1)` as `-ln u` with `u` uniform on `(0, 1]`.
pub fn unit_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u = 1.0 - rng.random::<f64>();
    -u.ln()
}

/// Draws `E_k = ε_k · exp(θ_k)`, one unit-exponential per key in key order.
/// Masked keys consume a draw too (so the stream layout does not depend on
/// the mask) but always yield exactly `0`.
pub fn sample_utilities<S: Scalar, R: Rng + ?Sized>(
    theta: &ThetaVector<S>,
    rng: &mut R,
) -> Utilities<S> {
    let noise: Vec<S> = (0..theta.len()).map(|_| S::lit(unit_exponential(rng))).collect();
    utilities_from_noise(theta, &noise)
}

/// The deterministic part of [`sample_utilities`]: `E_k = ε_k · exp(θ_k)`.
pub fn utilities_from_noise<S: Scalar>(theta: &ThetaVector<S>, noise: &[S]) -> Utilities<S> {
    assert_eq!(theta.len(), noise.len(), "noise length must match theta");
    Utilities::from_raw(
        noise
            .iter()
            .zip(theta.theta())
            .zip(theta.mask())
            .map(|((&eps, &t), &m)| if m { S::zero() } else { eps * t.exp() })
            .collect(),
    )
}

/// `∂E_k/∂θ_k`. With `E = ε/λ` and `λ = exp(-θ)` this is `E_k` itself.
pub fn reparam_diag<S: Scalar>(utilities: &Utilities<S>) -> Vec<S> {
    utilities.values().to_vec()
}

pub(crate) fn check_len(expected: usize, got: usize, what: &str) -> Result<()> {
    if expected != got {
        return Err(Error::InvalidArgument(format!(
            "{what} has {got} keys, expected {expected}"
        )));
    }
    Ok(())
}
