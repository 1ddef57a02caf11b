use std::io::Write;

use serde::{Deserialize, Serialize};
use stochinv::structures::StructureVisitor;
use stochinv::{EstimatorOptions, SeedStream, Structure, Theta};

use super::{estimate, fmt_real, initial_theta, json_err, make_loss, target_features};
use crate::config::{ExperimentConfig, Format};
use crate::error::CliResult;

/// One coordinate of one estimator.
///
/// `variance` is normalized to a single loss evaluation: the variance of
/// one contribution times the evaluations it spends, so estimators with
/// different batch sizes compare at equal budget. `stderr` is the standard
/// error of `mean`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub estimator: String,
    pub coordinate: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
}

impl StructureVisitor for Run<'_> {
    type Output = CliResult<Vec<VarianceRow>>;

    fn visit<D: Structure>(&mut self, def: &D) -> Self::Output {
        let values = initial_theta(self.cfg, def.num_keys())?;
        let theta = Theta::new(values.clone())?;
        let target = target_features(def, self.cfg, &values)?;
        let loss = make_loss(def, self.cfg.loss, target);
        let seeds = SeedStream::new(self.cfg.seed);
        let mut rows = Vec::new();
        for (i, est) in self.cfg.estimators.iter().enumerate() {
            let report = estimate(def, &theta, &loss, est, EstimatorOptions::from(seeds.fork(i as u64)))?;
            let per_eval = (report.samples_used / report.contributions) as f64;
            for (c, ((&m, &v), s)) in report.gradient.iter().zip(&report.variance).zip(report.stderr()).enumerate() {
                rows.push(VarianceRow { estimator: est.name(), coordinate: c, mean: m, variance: v * per_eval, stderr: s });
            }
        }
        Ok(rows)
    }
}

/// Runs every configured estimator at the initial θ.
pub fn cmd_variance(cfg: &ExperimentConfig) -> CliResult<Vec<VarianceRow>> {
    cfg.check()?;
    cfg.structure_kind()?.visit(&mut Run { cfg })?
}

pub fn write_variance(rows: &[VarianceRow], format: Format, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Format::Csv => {
            writeln!(out, "estimator,coordinate,mean,variance,stderr")?;
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.estimator,
                    r.coordinate,
                    fmt_real(r.mean),
                    fmt_real(r.variance),
                    fmt_real(r.stderr)
                )?;
            }
        }
        Format::Json => {
            serde_json::to_writer(&mut *out, rows).map_err(json_err)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
