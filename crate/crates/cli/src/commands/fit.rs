use std::io::Write;

use serde::{Deserialize, Serialize};
use stochinv::oracle::exact_expected_loss;
use stochinv::structures::StructureVisitor;
use stochinv::{run_struct, sample_utilities, Error, EstimatorOptions, SeedStream, Structure, Theta};

use super::{estimate, fmt_real, initial_theta, json_err, make_loss, target_features};
use crate::config::{ExperimentConfig, Format, OptimizerConfig};
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub iter: usize,
    /// Expected loss at the θ of this iteration, before its update.
    pub expected_loss: f64,
    /// Whether `expected_loss` comes from enumeration.
    pub exact: bool,
    /// Monte Carlo standard error; absent when exact.
    pub stderr: Option<f64>,
    /// Norm of the gradient estimate used for the update; absent on the final row.
    pub gradient_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRun {
    pub rows: Vec<FitRow>,
    pub theta: Vec<f64>,
}

impl FitRun {
    pub fn initial_loss(&self) -> f64 {
        self.rows[0].expected_loss
    }

    pub fn final_loss(&self) -> f64 {
        self.rows.last().expect("at least one row").expected_loss
    }
}

struct Adam {
    cfg: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(cfg: OptimizerConfig, n: usize) -> Self {
        Self { cfg, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, theta: &mut [f64], g: &[f64]) {
        let c = self.cfg;
        self.t += 1;
        let (b1t, b2t) = (1.0 - c.beta1.powi(self.t), 1.0 - c.beta2.powi(self.t));
        for i in 0..theta.len() {
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g[i];
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g[i] * g[i];
            theta[i] -= c.step_size * (self.m[i] / b1t) / ((self.v[i] / b2t).sqrt() + c.epsilon);
        }
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    cap: usize,
}

impl StructureVisitor for Run<'_> {
    type Output = CliResult<FitRun>;

    fn visit<D: Structure>(&mut self, def: &D) -> Self::Output {
        let cfg = self.cfg;
        let mut values = initial_theta(cfg, def.num_keys())?;
        let target = target_features(def, cfg, &values)?;
        let loss = make_loss(def, cfg.loss, target);
        let exact = match exact_expected_loss(def, &Theta::new(values.clone())?, self.cap, &loss) {
            Ok(_) => true,
            Err(Error::InstanceTooLarge { .. }) => false,
            Err(e) => return Err(e.into()),
        };
        let seeds = SeedStream::new(cfg.seed);
        let evaluate = |theta: &Theta, it: usize| -> CliResult<(f64, Option<f64>)> {
            if exact {
                return Ok((exact_expected_loss(def, theta, self.cap, &loss)?, None));
            }
            let eval = seeds.fork(2 * it as u64 + 1);
            let n = cfg.optimizer.eval_samples.max(2);
            let mut ls = Vec::with_capacity(n);
            for i in 0..n {
                let (x, _) = run_struct(def, &sample_utilities(theta, &mut eval.rng(i as u64)))?;
                ls.push(loss(&x));
            }
            let mean = ls.iter().sum::<f64>() / n as f64;
            let var = ls.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Ok((mean, Some((var / n as f64).sqrt())))
        };

        let mut adam = Adam::new(cfg.optimizer, values.len());
        let mut rows = Vec::with_capacity(cfg.optimizer.iterations + 1);
        for it in 0..cfg.optimizer.iterations {
            let theta = Theta::new(values.clone())?;
            let (l, stderr) = evaluate(&theta, it)?;
            let opts = EstimatorOptions::from(seeds.fork(2 * it as u64));
            let g = estimate(def, &theta, &loss, &cfg.estimator, opts)?.gradient;
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            adam.step(&mut values, &g);
            rows.push(FitRow { iter: it, expected_loss: l, exact, stderr, gradient_norm: Some(norm) });
        }
        let it = cfg.optimizer.iterations;
        let (l, stderr) = evaluate(&Theta::new(values.clone())?, it)?;
        rows.push(FitRow { iter: it, expected_loss: l, exact, stderr, gradient_norm: None });
        Ok(FitRun { rows, theta: values })
    }
}

/// Minimizes the expected loss over θ with Adam, using the configured
/// estimator for gradients. Iteration `i` draws its samples from
/// `fork(2i)` of the seed.
pub fn cmd_fit(cfg: &ExperimentConfig) -> CliResult<FitRun> {
    cfg.check()?;
    let cap = cfg.trace_cap()?;
    cfg.structure_kind()?.visit(&mut Run { cfg, cap })?
}

/// Per-iteration log. The final θ is written separately.
pub fn write_fit(run: &FitRun, format: Format, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Format::Csv => {
            writeln!(out, "iter,expected_loss,source,stderr,gradient_norm")?;
            for r in &run.rows {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.iter,
                    fmt_real(r.expected_loss),
                    if r.exact { "exact" } else { "estimate" },
                    r.stderr.map(fmt_real).unwrap_or_default(),
                    r.gradient_norm.map(fmt_real).unwrap_or_default()
                )?;
            }
        }
        Format::Json => {
            serde_json::to_writer(&mut *out, &run.rows).map_err(json_err)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
