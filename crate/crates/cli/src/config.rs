//! Experiment configuration: one JSON document, with command-line flags
//! overriding individual fields.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stochinv::structures::{Graph, StructureKind};

use crate::error::{CliError, CliResult};
use crate::graph_file::GraphFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub structure: StructureConfig,
    #[serde(default)]
    pub theta: ThetaInit,
    /// Estimator used by `fit`.
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorConfig,
    /// Estimators compared by `variance`.
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub seed: u64,
    /// Number of draws for `sample` and `condcheck`.
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub precision: Precision,
    /// Enumeration cap; `STOCHINV_MAX_TRACES` takes precedence.
    #[serde(default)]
    pub max_traces: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureConfig {
    TopK { d: usize, k: usize },
    Argsort { d: usize },
    Matching { n: usize },
    BinaryTree { n: usize },
    Kruskal { graph: GraphSource },
    Cle { graph: GraphSource, #[serde(default)] root: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    /// Path to a graph file, relative to the config file.
    File(PathBuf),
    /// Complete graph on this many vertices.
    Complete(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "init", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaInit {
    Constant { value: f64 },
    /// Uniform on `[low, high)`, seeded from `seed` or the experiment seed.
    Random { low: f64, high: f64, #[serde(default)] seed: Option<u64> },
    /// A JSON file `{"theta": [...]}`, as written by `fit`.
    File { path: PathBuf },
}

impl Default for ThetaInit {
    fn default() -> Self {
        ThetaInit::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSpace {
    Trace,
    Utility,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlVariateConfig {
    Zero,
    /// `c(e) = Σ a_k e_k²`.
    Quadratic(Vec<f64>),
}

/// `n_samples` is the loss-evaluation budget per gradient estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorConfig {
    EReinforce { n_samples: usize },
    TReinforce { n_samples: usize },
    /// Leave-one-out with `k` samples per batch; `n_samples / k` batches.
    Loo { n_samples: usize, k: usize, space: ScoreSpace },
    Relax { n_samples: usize, control_variate: ControlVariateConfig },
}

impl EstimatorConfig {
    pub fn name(&self) -> String {
        match self {
            EstimatorConfig::EReinforce { .. } => "e_reinforce".into(),
            EstimatorConfig::TReinforce { .. } => "t_reinforce".into(),
            EstimatorConfig::Loo { k, space: ScoreSpace::Trace, .. } => format!("t_loo_k{k}"),
            EstimatorConfig::Loo { k, space: ScoreSpace::Utility, .. } => format!("e_loo_k{k}"),
            EstimatorConfig::Relax { .. } => "relax".into(),
        }
    }

    pub fn budget(&self) -> usize {
        match *self {
            EstimatorConfig::EReinforce { n_samples }
            | EstimatorConfig::TReinforce { n_samples }
            | EstimatorConfig::Loo { n_samples, .. }
            | EstimatorConfig::Relax { n_samples, .. } => n_samples,
        }
    }

    fn check(&self) -> CliResult<()> {
        if let EstimatorConfig::Loo { n_samples, k, .. } = *self {
            if k < 2 {
                return Err(CliError::user(format!("leave-one-out needs k >= 2, got {k}")));
            }
            if n_samples < k {
                return Err(CliError::user(format!("n_samples {n_samples} is smaller than one batch of {k}")));
            }
        }
        if self.budget() == 0 {
            return Err(CliError::user("n_samples must be at least 1"));
        }
        Ok(())
    }
}

fn default_estimator() -> EstimatorConfig {
    EstimatorConfig::Loo { n_samples: 16, k: 4, space: ScoreSpace::Trace }
}

fn default_estimators() -> Vec<EstimatorConfig> {
    vec![
        EstimatorConfig::EReinforce { n_samples: 10_000 },
        EstimatorConfig::TReinforce { n_samples: 10_000 },
        EstimatorConfig::Loo { n_samples: 10_000, k: 4, space: ScoreSpace::Trace },
    ]
}

fn default_draws() -> usize {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossConfig {
    /// Hamming distance between feature sets of the sample and the target.
    #[default]
    Hamming,
    Constant { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// The structure produced by the mean utilities `exp(θ)` at the initial θ.
    #[default]
    InitialMode,
    /// The structure the recursion builds when the listed keys have the
    /// smallest utilities, in the listed order.
    Keys(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub epsilon: f64,
    /// Draws used for the Monte Carlo loss estimate when enumeration is too large.
    #[serde(default = "default_eval")]
    pub eval_samples: usize,
}

fn default_step() -> f64 {
    1e-2
}
fn default_iterations() -> usize {
    2000
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_eval() -> usize {
    1000
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: default_step(),
            iterations: default_iterations(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
            eval_samples: default_eval(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output path; standard output when absent.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    /// Where `fit` writes the final θ; defaults to `<path>.theta.json`.
    #[serde(default)]
    pub theta_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config with defaults for everything but the structure.
    pub fn new(structure: StructureConfig) -> Self {
        Self {
            structure,
            theta: ThetaInit::default(),
            estimator: default_estimator(),
            estimators: default_estimators(),
            loss: LossConfig::default(),
            target: TargetConfig::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            draws: default_draws(),
            precision: Precision::default(),
            max_traces: None,
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::user(format!("invalid config: {e}")))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::user(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        match &mut self.structure {
            StructureConfig::Kruskal { graph: GraphSource::File(p) }
            | StructureConfig::Cle { graph: GraphSource::File(p), .. } => fix(p),
            _ => {}
        }
        if let ThetaInit::File { path } = &mut self.theta {
            fix(path);
        }
    }

    /// Validates fields that serde cannot.
    pub fn check(&self) -> CliResult<()> {
        self.estimator.check()?;
        for e in &self.estimators {
            e.check()?;
        }
        if let ThetaInit::Random { low, high, .. } = self.theta {
            if !(low < high && low.is_finite() && high.is_finite()) {
                return Err(CliError::user(format!("random theta range [{low}, {high}) is empty or not finite")));
            }
        }
        let o = &self.optimizer;
        if !(o.step_size > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.epsilon > 0.0) {
            return Err(CliError::user("optimizer needs step_size > 0, decays in [0, 1) and epsilon > 0"));
        }
        if self.max_traces == Some(0) {
            return Err(CliError::user("max_traces must be positive"));
        }
        Ok(())
    }

    /// Resolves the structure, reading graph files as needed.
    pub fn structure_kind(&self) -> CliResult<StructureKind> {
        Ok(match &self.structure {
            StructureConfig::TopK { d, k } => StructureKind::TopK { d: *d, k: *k },
            StructureConfig::Argsort { d } => StructureKind::Argsort { d: *d },
            StructureConfig::Matching { n } => StructureKind::Matching { n: *n },
            StructureConfig::BinaryTree { n } => StructureKind::BinaryTree { n: *n },
            StructureConfig::Kruskal { graph } => {
                let (g, _) = load_graph(graph, false)?;
                StructureKind::Kruskal { graph: g }
            }
            StructureConfig::Cle { graph, root } => {
                let (g, file_root) = load_graph(graph, true)?;
                let root = root.or(file_root).ok_or_else(|| {
                    CliError::user("CLE needs a root: add a 'root r' line to the graph file or set structure.root")
                })?;
                StructureKind::Cle { graph: g, root }
            }
        })
    }

    /// Effective enumeration cap.
    pub fn trace_cap(&self) -> CliResult<usize> {
        match std::env::var("STOCHINV_MAX_TRACES") {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&c| c > 0)
                .ok_or_else(|| CliError::user(format!("STOCHINV_MAX_TRACES='{v}' is not a positive integer"))),
            Err(_) => Ok(self.max_traces.unwrap_or(stochinv::oracle::DEFAULT_MAX_TRACES)),
        }
    }
}

fn load_graph(src: &GraphSource, directed: bool) -> CliResult<(Graph, Option<usize>)> {
    let (g, root) = match src {
        GraphSource::Complete(n) if directed => (Graph::complete_directed(*n), None),
        GraphSource::Complete(n) => (Graph::complete_undirected(*n), None),
        GraphSource::File(path) => {
            let f = GraphFile::read(path)?;
            (f.graph, f.root)
        }
    };
    if g.directed != directed {
        let want = if directed { "directed" } else { "undirected" };
        return Err(CliError::user(format!("this structure needs an {want} graph")));
    }
    Ok((g, root))
}
