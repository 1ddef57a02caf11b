//! Floating-point scalar abstraction.
//!
//! Every numeric routine in the crate is written against [`Scalar`], so the
//! same code runs in `f64` (the default, see the aliases at the crate root)
//! and in `f32` (useful to observe precision effects of conditional
//! sampling).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used for rates, utilities, log-probabilities and gradients.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite values, which never happens for `f32`/`f64`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion to `f64` for statistics and reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log Σ exp(x_i)` with max-shift. Returns `-∞` for an empty input.
pub fn log_sum_exp<S: Scalar>(xs: impl IntoIterator<Item = S> + Clone) -> S {
    let m = xs
        .clone()
        .into_iter()
        .fold(S::neg_infinity(), |acc, x| if x > acc { x } else { acc });
    if !m.is_finite() {
        return m;
    }
    let s: S = xs.into_iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_and_survives_large_inputs() {
        let xs = [0.1f64, -2.0, 1.5];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs) - naive).abs() < 1e-14);
        let big = [1000.0f64, 1000.0];
        assert!((log_sum_exp(big) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(Vec::<f64>::new()), f64::NEG_INFINITY);
    }

    #[test]
    fn lse_f32() {
        let v = log_sum_exp([0.0f32, 0.0]);
        assert!((v - 2f32.ln()).abs() < 1e-6);
    }
}
