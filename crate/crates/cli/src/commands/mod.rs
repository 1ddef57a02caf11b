//! Subcommand implementations. Each `cmd_*` function computes an in-memory
//! report; the `write_*` functions serialize it.

mod condcheck;
mod enumerate;
mod fit;
mod sample;
mod variance;

pub use condcheck::{cmd_condcheck, write_condcheck, CondCheckReport};
pub use enumerate::{cmd_enumerate, write_enumerate, EnumerateReport, TraceRecord};
pub use fit::{cmd_fit, write_fit, FitRow, FitRun};
pub use sample::{cmd_sample, write_sample, SampleRecord};
pub use variance::{cmd_variance, write_variance, VarianceRow};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use stochinv::structures::hamming;
use stochinv::{
    grad_e_reinforce, grad_loo, grad_relax, grad_t_reinforce, run_struct, ControlVariate, EstimatorOptions,
    QuadraticCv, Report, Scalar, SeedStream, Space, Structure, ThetaVector, Trace, Utilities, ZeroCv,
};

use crate::config::{ControlVariateConfig, EstimatorConfig, ExperimentConfig, LossConfig, ScoreSpace, TargetConfig, ThetaInit};
use crate::error::{CliError, CliResult};

/// On-disk θ: `{"theta": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFile {
    pub theta: Vec<f64>,
}

impl ThetaFile {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::user(format!("cannot read theta file {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::user(format!("invalid theta file {}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = create(path)?;
        serde_json::to_writer(&mut w, self).map_err(CliError::internal)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::user(format!("cannot create {}: {e}", path.display())))
}

/// Initial θ as `f64`, `n` keys.
pub fn initial_theta(cfg: &ExperimentConfig, n: usize) -> CliResult<Vec<f64>> {
    let values = match &cfg.theta {
        ThetaInit::Constant { value } => vec![*value; n],
        ThetaInit::Random { low, high, seed } => {
            let mut rng = SeedStream::new(seed.unwrap_or(cfg.seed)).fork(0x7e7a).rng(0);
            (0..n).map(|_| rng.random_range(*low..*high)).collect()
        }
        ThetaInit::File { path } => {
            let f = ThetaFile::read(path)?;
            if f.theta.len() != n {
                return Err(CliError::user(format!(
                    "theta file {} has {} entries, structure has {n} keys",
                    path.display(),
                    f.theta.len()
                )));
            }
            f.theta
        }
    };
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::user(format!("theta value {v} is not finite")));
    }
    Ok(values)
}

pub(crate) fn theta_as<S: Scalar>(values: &[f64]) -> CliResult<ThetaVector<S>> {
    Ok(ThetaVector::new(values.iter().map(|&v| S::lit(v)).collect())?)
}

/// Feature set of the loss target.
pub(crate) fn target_features<D: Structure>(def: &D, cfg: &ExperimentConfig, theta: &[f64]) -> CliResult<Vec<usize>> {
    let n = def.num_keys();
    let utilities = match &cfg.target {
        TargetConfig::InitialMode => theta.iter().map(|t| t.exp()).collect(),
        TargetConfig::Keys(keys) => {
            let mut u: Vec<f64> = (0..n).map(|k| (n + 1 + k) as f64).collect();
            let mut seen = vec![false; n];
            for (rank, &k) in keys.iter().enumerate() {
                if k >= n || seen[k] {
                    return Err(CliError::user(format!("target key {k} is out of range or repeated")));
                }
                seen[k] = true;
                u[k] = (rank + 1) as f64;
            }
            u
        }
    };
    let (x, _) = run_struct(def, &Utilities::new(utilities)?)?;
    Ok(def.features(&x))
}

pub(crate) fn make_loss<'a, D: Structure>(
    def: &'a D,
    loss: LossConfig,
    target: Vec<usize>,
) -> impl Fn(&D::Value) -> f64 + Sync + 'a {
    move |x| match loss {
        LossConfig::Hamming => hamming(&def.features(x), &target) as f64,
        LossConfig::Constant { value } => value,
    }
}

pub(crate) fn control_variate(cfg: &ControlVariateConfig, n: usize) -> CliResult<Box<dyn ControlVariate<f64>>> {
    Ok(match cfg {
        ControlVariateConfig::Zero => Box::new(ZeroCv),
        ControlVariateConfig::Quadratic(a) => {
            if a.len() != n {
                return Err(CliError::user(format!("quadratic control variate has {} weights for {n} keys", a.len())));
            }
            Box::new(QuadraticCv { a: a.clone() })
        }
    })
}

/// Runs one configured estimator.
pub(crate) fn estimate<D, L>(
    def: &D,
    theta: &ThetaVector<f64>,
    loss: L,
    est: &EstimatorConfig,
    opts: EstimatorOptions,
) -> CliResult<Report>
where
    D: Structure,
    L: Fn(&D::Value) -> f64 + Sync,
{
    Ok(match est {
        EstimatorConfig::EReinforce { n_samples } => grad_e_reinforce(def, theta, loss, *n_samples, opts)?,
        EstimatorConfig::TReinforce { n_samples } => grad_t_reinforce(def, theta, loss, *n_samples, opts)?,
        EstimatorConfig::Loo { n_samples, k, space } => {
            let space = match space {
                ScoreSpace::Trace => Space::Trace,
                ScoreSpace::Utility => Space::Utility,
            };
            grad_loo(def, theta, loss, *k, space, n_samples / k, opts)?
        }
        EstimatorConfig::Relax { n_samples, control_variate: cv } => {
            let cv = control_variate(cv, theta.len())?;
            grad_relax(def, theta, loss, cv.as_ref(), *n_samples, opts)?
        }
    })
}

pub(crate) fn trace_keys(t: &Trace) -> Vec<Vec<usize>> {
    t.levels().iter().map(|l| l.iter().map(|e| e.winner).collect()).collect()
}

/// Reals in CSV: scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub(crate) fn fmt_trace(t: &[Vec<usize>]) -> String {
    t.iter()
        .map(|l| l.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("|")
}

/// Quotes a CSV field when needed.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn json_err(e: serde_json::Error) -> CliError {
    CliError::internal(e)
}
