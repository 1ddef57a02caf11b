//! Goodness-of-fit and variance-comparison tests.

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Pearson chi-square statistic and p-value for `counts` against `probs`.
///
/// Cells whose expected count is below 5 are pooled together; a pooled cell
/// that is still below 5 is merged into the smallest regular cell.
pub fn chi_square_counts(counts: &[u64], probs: &[f64]) -> Result<(f64, f64)> {
    if counts.len() != probs.len() {
        return Err(Error::InvalidArgument(format!(
            "{} counts for {} probabilities",
            counts.len(),
            probs.len()
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (expected, observed)
    let mut pooled = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let exp = n * p;
        if exp < 5.0 {
            pooled.0 += exp;
            pooled.1 += c as f64;
        } else {
            cells.push((exp, c as f64));
        }
    }
    if pooled.0 > 0.0 || pooled.1 > 0.0 {
        if pooled.0 >= 5.0 || cells.is_empty() {
            cells.push(pooled);
        } else {
            let smallest = cells
                .iter_mut()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("nonempty");
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }
    let mut stat = 0.0;
    for &(e, o) in &cells {
        if e > 0.0 {
            stat += (o - e) * (o - e) / e;
        } else if o > 0.0 {
            return Ok((f64::INFINITY, 0.0));
        }
    }
    let df = cells.len().saturating_sub(1);
    if df == 0 {
        return Ok((stat, 1.0));
    }
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok((stat, chi.sf(stat)))
}

/// One-sample Kolmogorov-Smirnov test against `Exp(rate)`.
///
/// Returns the statistic `D` and the asymptotic p-value with Stephens'
/// small-sample correction.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<(f64, f64)> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be positive and finite, got {rate}")));
    }
    if samples.len() < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 samples, got {}", samples.len())));
    }
    if let Some(x) = samples.iter().find(|&&x| x.is_nan() || x < -1e-12) {
        return Err(Error::InvalidArgument(format!("sample {x} is negative")));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = 1.0 - (-rate * x.max(0.0)).exp();
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max(cdf - lo).max(hi - cdf);
    }
    let sq = n.sqrt();
    Ok((d, kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for j in 1..=100 {
        let jf = j as f64;
        let term = sign * 2.0 * (a * jf * jf).exp();
        sum += term;
        if term.abs() <= 1e-12 * prev.abs() || term.abs() <= 1e-300 {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term;
    }
    1.0
}

/// Result of [`bootstrap_variance_le`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOutcome {
    /// Observed `totvar(a) - totvar(b)`.
    pub observed_diff: f64,
    /// Upper bootstrap quantile of the difference at the requested confidence.
    pub upper_bound: f64,
    /// `upper_bound <= 0`.
    pub confirmed: bool,
}

fn total_variance(samples: &[Vec<f64>], idx: impl Iterator<Item = usize>, dim: usize) -> f64 {
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let mut n = 0usize;
    for i in idx {
        for (c, &x) in samples[i].iter().enumerate() {
            sum[c] += x;
            sq[c] += x * x;
        }
        n += 1;
    }
    let nf = n as f64;
    sum.iter()
        .zip(&sq)
        .map(|(s, q)| (q - s * s / nf) / (nf - 1.0))
        .sum()
}

/// One-sided bootstrap test of `totvar(a) <= totvar(b)`, where each sample is
/// a per-draw gradient vector and total variance sums the per-coordinate
/// variances. The two sample sets are resampled independently.
pub fn bootstrap_variance_le<R: Rng + ?Sized>(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    reps: usize,
    confidence: f64,
    rng: &mut R,
) -> Result<BootstrapOutcome> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples per side".into()));
    }
    let dim = a[0].len();
    if a.iter().chain(b).any(|v| v.len() != dim) {
        return Err(Error::InvalidArgument("gradient samples differ in dimension".into()));
    }
    if !(0.0..1.0).contains(&confidence) || reps == 0 {
        return Err(Error::InvalidArgument("confidence must lie in [0, 1) and reps > 0".into()));
    }
    let observed_diff = total_variance(a, 0..a.len(), dim) - total_variance(b, 0..b.len(), dim);
    let mut diffs: Vec<f64> = (0..reps)
        .map(|_| {
            let ia: Vec<usize> = (0..a.len()).map(|_| rng.random_range(0..a.len())).collect();
            let ib: Vec<usize> = (0..b.len()).map(|_| rng.random_range(0..b.len())).collect();
            total_variance(a, ia.into_iter(), dim) - total_variance(b, ib.into_iter(), dim)
        })
        .collect();
    diffs.sort_by(f64::total_cmp);
    let pos = ((confidence * reps as f64).ceil() as usize).clamp(1, reps) - 1;
    let upper_bound = diffs[pos];
    Ok(BootstrapOutcome { observed_diff, upper_bound, confirmed: upper_bound <= 0.0 })
}
