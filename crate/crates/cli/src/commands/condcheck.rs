use std::io::Write;

use serde::{Deserialize, Serialize};
use stochinv::oracle::ks_exponential;
use stochinv::recursion::cond_sample;
use stochinv::structures::StructureVisitor;
use stochinv::{run_struct, sample_utilities, Scalar, SeedStream, Structure};

use super::{fmt_real, initial_theta, json_err, theta_as};
use crate::config::{ExperimentConfig, Format, Precision};
use crate::error::CliResult;

/// Round-trip failures and per-key KS results for conditional samples.
///
/// KS tests need at least 100 draws; with fewer the lists are empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondCheckReport {
    pub precision: Precision,
    pub draws: usize,
    pub roundtrip_failures: usize,
    pub per_key_ks_statistics: Vec<f64>,
    pub per_key_ks_pvalues: Vec<f64>,
}

struct Run<'a, S> {
    cfg: &'a ExperimentConfig,
    _s: std::marker::PhantomData<S>,
}

impl<S: Scalar> StructureVisitor for Run<'_, S> {
    type Output = CliResult<CondCheckReport>;

    fn visit<D: Structure>(&mut self, def: &D) -> Self::Output {
        let values = initial_theta(self.cfg, def.num_keys())?;
        let theta = theta_as::<S>(&values)?;
        let seeds = SeedStream::new(self.cfg.seed);
        let n = self.cfg.draws;
        let mut failures = 0;
        let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); def.num_keys()];
        for i in 0..n {
            let mut rng = seeds.rng(i as u64);
            let (_, t) = run_struct(def, &sample_utilities(&theta, &mut rng))?;
            let (e, _) = cond_sample(def, &t, &theta, &mut rng)?;
            let (_, t2) = run_struct(def, &e)?;
            if t2 != t {
                failures += 1;
            }
            for (c, v) in cols.iter_mut().zip(e.values()) {
                c.push(v.as_f64());
            }
        }
        let (mut stats, mut pvals) = (Vec::new(), Vec::new());
        if n >= 100 {
            for (k, c) in cols.iter().enumerate() {
                let (d, p) = ks_exponential(c, (-theta.get(k).as_f64()).exp())?;
                stats.push(d);
                pvals.push(p);
            }
        }
        Ok(CondCheckReport {
            precision: self.cfg.precision,
            draws: n,
            roundtrip_failures: failures,
            per_key_ks_statistics: stats,
            per_key_ks_pvalues: pvals,
        })
    }
}

/// Draws `(trace, conditional sample)` pairs at the configured precision,
/// counts traces that `run_struct` fails to reproduce, and KS-tests every
/// key's conditional utility against `Exp(λ_k)`.
pub fn cmd_condcheck(cfg: &ExperimentConfig) -> CliResult<CondCheckReport> {
    cfg.check()?;
    let kind = cfg.structure_kind()?;
    match cfg.precision {
        Precision::F64 => kind.visit(&mut Run::<f64> { cfg, _s: Default::default() })?,
        Precision::F32 => kind.visit(&mut Run::<f32> { cfg, _s: Default::default() })?,
    }
}

pub fn write_condcheck(report: &CondCheckReport, format: Format, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Format::Json => {
            serde_json::to_writer(&mut *out, report).map_err(json_err)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "draws,roundtrip_failures,key,ks_statistic,ks_pvalue")?;
            let (n, f) = (report.draws, report.roundtrip_failures);
            if report.per_key_ks_pvalues.is_empty() {
                writeln!(out, "{n},{f},,,")?;
            }
            for (k, (d, p)) in report.per_key_ks_statistics.iter().zip(&report.per_key_ks_pvalues).enumerate() {
                writeln!(out, "{n},{f},{k},{},{}", fmt_real(*d), fmt_real(*p))?;
            }
        }
    }
    Ok(())
}
