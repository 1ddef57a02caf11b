//! Command-line front end: configuration, graph files and the subcommands
//! `enumerate`, `sample`, `variance`, `fit` and `condcheck`.

pub mod commands;
pub mod config;
pub mod error;
pub mod graph_file;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::*;
pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
pub use graph_file::GraphFile;

use config::{Format, Precision};

#[derive(Debug, Parser)]
#[command(name = "stochinv", version, about = "Distributions over structures built by recursive algorithms")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output path; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Every trace with its probability, plus structure marginals.
    Enumerate,
    /// Independent draws as JSON lines.
    Sample {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Per-coordinate mean and variance of each configured estimator.
    Variance,
    /// Adam on θ toward the target structure.
    Fit {
        #[arg(long)]
        iterations: Option<usize>,
        /// Where to write the final θ.
        #[arg(long)]
        theta_out: Option<PathBuf>,
    },
    /// Conditional-sampling round trip and per-key KS tests.
    Condcheck {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_enum)]
        precision: Option<PrecisionArg>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

impl Cli {
    /// Reads the config and applies flag overrides.
    pub fn load_config(&self) -> CliResult<ExperimentConfig> {
        let path = self.config.as_ref().ok_or_else(|| CliError::user("--config is required"))?;
        let mut cfg = ExperimentConfig::read(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output.path = Some(o.clone());
        }
        if let Some(f) = self.format {
            cfg.output.format = Some(f);
        }
        match &self.command {
            Command::Sample { n: Some(n) } | Command::Condcheck { n: Some(n), .. } => cfg.draws = *n,
            _ => {}
        }
        match &self.command {
            Command::Fit { iterations, theta_out } => {
                if let Some(i) = iterations {
                    cfg.optimizer.iterations = *i;
                }
                if let Some(p) = theta_out {
                    cfg.output.theta_path = Some(p.clone());
                }
            }
            Command::Condcheck { precision: Some(p), .. } => {
                cfg.precision = match p {
                    PrecisionArg::F32 => Precision::F32,
                    PrecisionArg::F64 => Precision::F64,
                };
            }
            _ => {}
        }
        Ok(cfg)
    }
}

fn open_output(cfg: &ExperimentConfig) -> CliResult<Box<dyn Write>> {
    Ok(match &cfg.output.path {
        Some(p) => Box::new(commands::create(p)?),
        None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
    })
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = cli.load_config()?;
    let fmt = |default| cfg.output.format.unwrap_or(default);
    match &cli.command {
        Command::Enumerate => {
            let report = cmd_enumerate(&cfg)?;
            let mut out = open_output(&cfg)?;
            write_enumerate(&report, fmt(Format::Json), &mut out)?;
            out.flush()?;
        }
        Command::Sample { .. } => {
            let records = cmd_sample(&cfg)?;
            let mut out = open_output(&cfg)?;
            write_sample(&records, fmt(Format::Json), &mut out)?;
            out.flush()?;
        }
        Command::Variance => {
            let rows = cmd_variance(&cfg)?;
            let mut out = open_output(&cfg)?;
            write_variance(&rows, fmt(Format::Csv), &mut out)?;
            out.flush()?;
        }
        Command::Fit { .. } => {
            let run = cmd_fit(&cfg)?;
            let mut out = open_output(&cfg)?;
            write_fit(&run, fmt(Format::Csv), &mut out)?;
            out.flush()?;
            let theta = ThetaFile { theta: run.theta };
            let path = cfg
                .output
                .theta_path
                .clone()
                .or_else(|| cfg.output.path.as_ref().map(|p| p.with_extension("theta.json")));
            match path {
                Some(p) => theta.write(&p)?,
                None => eprintln!("final theta: {}", serde_json::to_string(&theta).map_err(CliError::internal)?),
            }
        }
        Command::Condcheck { .. } => {
            let report = cmd_condcheck(&cfg)?;
            let mut out = open_output(&cfg)?;
            write_condcheck(&report, fmt(Format::Json), &mut out)?;
            out.flush()?;
        }
    }
    Ok(())
}
