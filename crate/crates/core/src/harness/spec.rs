use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::daemon::{DaemonStrategy, PolicyError, PolicySpec};
use crate::graph::{generate, parse_graph, Graph, GraphError, GraphKind, NodeId};
use crate::model::Algorithm;

pub const DEFAULT_CLOSURE_ROUNDS: u64 = 5;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed experiment file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("trial count must be at least 1")]
    NoTrials,
    #[error("max_steps must be at least 1")]
    NoSteps,
    #[error("max_rounds must be at least 1")]
    NoRounds,
    #[error("p_bound must lie in (0, 1), got {0}")]
    Probability(f64),
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("graph needs either `kind` and `n` or `file`")]
    GraphSource,
    #[error("the anonymous algorithm takes no Byzantine nodes")]
    AnonymousByzantine,
    #[error("byz_policy: {0}")]
    Policy(#[from] PolicyError),
}

/// Graph section of an experiment file. `file` takes precedence over the
/// generator fields. Without `seed`, Gnp graphs are redrawn per trial.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    #[serde(default)]
    pub kind: Option<GraphKind>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// Byzantine node ids, added to any listed in `file`.
    #[serde(default)]
    pub byzantine: Vec<NodeId>,
}

/// Experiment file contents, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub algo: Algorithm,
    pub graph: GraphSpec,
    pub daemon: DaemonStrategy,
    #[serde(default = "default_policy")]
    pub byz_policy: String,
    pub trials: usize,
    pub seed: u64,
    pub p_bound: f64,
    #[serde(default)]
    pub max_rounds: Option<u64>,
    #[serde(default)]
    pub max_steps: Option<u64>,
    #[serde(default)]
    pub closure_rounds: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_policy() -> String {
    "silent".into()
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks every field and resolves the graph and policy.
    pub fn validate(&self) -> Result<Experiment, SpecError> {
        if self.trials == 0 {
            return Err(SpecError::NoTrials);
        }
        if self.max_steps == Some(0) {
            return Err(SpecError::NoSteps);
        }
        if self.max_rounds == Some(0) {
            return Err(SpecError::NoRounds);
        }
        if !(self.p_bound > 0.0 && self.p_bound < 1.0) {
            return Err(SpecError::Probability(self.p_bound));
        }
        let graph = self.graph.resolve()?;
        if self.algo == Algorithm::Anonymous && graph.has_byzantine() {
            return Err(SpecError::AnonymousByzantine);
        }
        let policy: PolicySpec = self.byz_policy.parse()?;
        Ok(Experiment {
            algo: self.algo,
            graph,
            daemon: self.daemon.clone(),
            policy,
            trials: self.trials,
            seed: self.seed,
            p_bound: self.p_bound,
            max_rounds: self.max_rounds,
            max_steps: self.max_steps,
            closure_rounds: self.closure_rounds.unwrap_or(DEFAULT_CLOSURE_ROUNDS),
        })
    }
}

impl GraphSpec {
    fn resolve(&self) -> Result<GraphSource, SpecError> {
        if let Some(path) = &self.file {
            let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
                path: path.clone(),
                source,
            })?;
            let g = parse_graph(&text)?;
            let mut byz = g.byzantine_nodes();
            byz.extend_from_slice(&self.byzantine);
            return Ok(GraphSource::Fixed(g.with_byzantine(&byz)?));
        }
        let (Some(kind), Some(n)) = (self.kind, self.n) else {
            return Err(SpecError::GraphSource);
        };
        let p = self.p.unwrap_or(0.0);
        // Validates n, p and the Byzantine ids once.
        let probe = generate(kind, n, p, self.seed.unwrap_or(0))?.with_byzantine(&self.byzantine)?;
        match (kind, self.seed) {
            (GraphKind::Gnp, None) => Ok(GraphSource::PerTrial {
                kind,
                n,
                p,
                byzantine: self.byzantine.clone(),
            }),
            _ => Ok(GraphSource::Fixed(probe)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Fixed(Graph),
    PerTrial {
        kind: GraphKind,
        n: usize,
        p: f64,
        byzantine: Vec<NodeId>,
    },
}

impl GraphSource {
    pub fn has_byzantine(&self) -> bool {
        match self {
            GraphSource::Fixed(g) => g.byzantine_count() > 0,
            GraphSource::PerTrial { byzantine, .. } => !byzantine.is_empty(),
        }
    }

    pub fn graph_for(&self, trial_seed: u64) -> Graph {
        match self {
            GraphSource::Fixed(g) => g.clone(),
            GraphSource::PerTrial {
                kind,
                n,
                p,
                byzantine,
            } => generate(*kind, *n, *p, graph_seed(trial_seed))
                .and_then(|g| g.with_byzantine(byzantine))
                .expect("validated graph parameters"),
        }
    }
}

/// Decorrelates the graph generator from the coin streams of the same trial.
fn graph_seed(trial_seed: u64) -> u64 {
    trial_seed.rotate_left(29) ^ 0x9e37_79b9_7f4a_7c15
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub algo: Algorithm,
    pub graph: GraphSource,
    pub daemon: DaemonStrategy,
    pub policy: PolicySpec,
    pub trials: usize,
    pub seed: u64,
    pub p_bound: f64,
    /// `None`: ten times the round bound (Byzantine runs only).
    pub max_rounds: Option<u64>,
    /// Transition cap. `None`: ten times the move bound for anonymous runs.
    pub max_steps: Option<u64>,
    pub closure_rounds: u64,
}

impl Experiment {
    pub fn trial_seed(&self, index: usize) -> u64 {
        self.seed ^ index as u64
    }
}
