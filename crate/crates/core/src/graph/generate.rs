use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, GraphError, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Path,
    Cycle,
    Complete,
    /// Node 0 is the centre.
    Star,
    /// Erdős–Rényi G(n, p).
    Gnp,
}

impl FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "path" => Ok(GraphKind::Path),
            "cycle" => Ok(GraphKind::Cycle),
            "complete" => Ok(GraphKind::Complete),
            "star" => Ok(GraphKind::Star),
            "gnp" => Ok(GraphKind::Gnp),
            other => Err(format!("unknown graph kind `{other}`")),
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            GraphKind::Path => "path",
            GraphKind::Cycle => "cycle",
            GraphKind::Complete => "complete",
            GraphKind::Star => "star",
            GraphKind::Gnp => "gnp",
        };
        f.write_str(name)
    }
}

/// Deterministic generator; `p` and `seed` only matter for [`GraphKind::Gnp`].
/// The result has no Byzantine nodes.
pub fn generate(kind: GraphKind, n: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    match kind {
        GraphKind::Path => edges.extend((1..n).map(|v| (v - 1, v))),
        GraphKind::Cycle => {
            edges.extend((1..n).map(|v| (v - 1, v)));
            if n >= 3 {
                edges.push((n - 1, 0));
            }
        }
        GraphKind::Complete => {
            for u in 0..n {
                edges.extend((u + 1..n).map(|v| (u, v)));
            }
        }
        GraphKind::Star => edges.extend((1..n).map(|v| (0, v))),
        GraphKind::Gnp => {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(GraphError::BadProbability(p));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for u in 0..n {
                for v in u + 1..n {
                    if rng.random_bool(p) {
                        edges.push((u, v));
                    }
                }
            }
        }
    }
    Graph::new(n, &edges, &[])
}
