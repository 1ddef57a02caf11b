use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use stochinv::oracle::enumerate;
use stochinv::structures::StructureVisitor;
use stochinv::{trace_log_prob, Structure, Theta};

use super::{csv_field, fmt_real, fmt_trace, initial_theta, json_err, trace_keys};
use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Winners per level.
    pub trace: Vec<Vec<usize>>,
    pub prob: f64,
    pub log_prob: f64,
    pub structure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerateReport {
    pub traces: Vec<TraceRecord>,
    pub structure_marginals: BTreeMap<String, f64>,
    pub total_prob: f64,
    pub theta: Vec<f64>,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    cap: usize,
}

impl StructureVisitor for Run<'_> {
    type Output = CliResult<EnumerateReport>;

    fn visit<D: Structure>(&mut self, def: &D) -> Self::Output {
        let values = initial_theta(self.cfg, def.num_keys())?;
        let theta = Theta::new(values.clone())?;
        let dist = enumerate(def, &theta, self.cap)?;
        let total_prob = dist.total_prob();
        let normalized = (total_prob - 1.0).abs() <= 1e-9;
        if !normalized {
            return Err(CliError::internal(format!("enumerated probabilities sum to {total_prob}")));
        }
        let traces = dist
            .entries
            .iter()
            .map(|e| {
                Ok(TraceRecord {
                    trace: trace_keys(&e.trace),
                    prob: e.prob,
                    log_prob: trace_log_prob(def, &e.trace, &theta)?,
                    structure: e.canonical.clone(),
                })
            })
            .collect::<CliResult<_>>()?;
        Ok(EnumerateReport { traces, structure_marginals: dist.structure_marginals, total_prob, theta: values })
    }
}

/// Enumerates every trace of the configured instance at its initial θ.
pub fn cmd_enumerate(cfg: &ExperimentConfig) -> CliResult<EnumerateReport> {
    cfg.check()?;
    let cap = cfg.trace_cap()?;
    cfg.structure_kind()?.visit(&mut Run { cfg, cap })?
}

pub fn write_enumerate(report: &EnumerateReport, format: Format, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Format::Json => {
            serde_json::to_writer(&mut *out, report).map_err(json_err)?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "trace,prob,log_prob,structure")?;
            for t in &report.traces {
                writeln!(
                    out,
                    "{},{},{},{}",
                    fmt_trace(&t.trace),
                    fmt_real(t.prob),
                    fmt_real(t.log_prob),
                    csv_field(&t.structure)
                )?;
            }
        }
    }
    Ok(())
}
