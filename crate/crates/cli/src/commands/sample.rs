use std::io::Write;

use serde::{Deserialize, Serialize};
use stochinv::structures::StructureVisitor;
use stochinv::{run_struct, sample_utilities, trace_log_prob, SeedStream, Structure, Theta};

use super::{csv_field, fmt_real, fmt_trace, initial_theta, json_err, trace_keys};
use crate::config::{ExperimentConfig, Format};
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub structure: String,
    pub trace: Vec<Vec<usize>>,
    pub log_prob: f64,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
}

impl StructureVisitor for Run<'_> {
    type Output = CliResult<Vec<SampleRecord>>;

    fn visit<D: Structure>(&mut self, def: &D) -> Self::Output {
        let theta = Theta::new(initial_theta(self.cfg, def.num_keys())?)?;
        let seeds = SeedStream::new(self.cfg.seed);
        (0..self.cfg.draws)
            .map(|i| {
                let e = sample_utilities(&theta, &mut seeds.rng(i as u64));
                let (x, t) = run_struct(def, &e)?;
                Ok(SampleRecord {
                    structure: def.canonical(&x),
                    log_prob: trace_log_prob(def, &t, &theta)?,
                    trace: trace_keys(&t),
                })
            })
            .collect()
    }
}

/// Draws `cfg.draws` structures; draw `i` uses stream `i` of the seed.
pub fn cmd_sample(cfg: &ExperimentConfig) -> CliResult<Vec<SampleRecord>> {
    cfg.check()?;
    cfg.structure_kind()?.visit(&mut Run { cfg })?
}

/// JSON lines, or CSV with a header.
pub fn write_sample(records: &[SampleRecord], format: Format, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Format::Json => {
            for r in records {
                serde_json::to_writer(&mut *out, r).map_err(json_err)?;
                writeln!(out)?;
            }
        }
        Format::Csv => {
            writeln!(out, "structure,trace,log_prob")?;
            for r in records {
                writeln!(out, "{},{},{}", csv_field(&r.structure), fmt_trace(&r.trace), fmt_real(r.log_prob))?;
            }
        }
    }
    Ok(())
}
