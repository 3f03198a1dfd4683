use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::model::{ByzantineUpdate, Configuration, LocalState, X_MAX};

/// ChaCha stream reserved for Byzantine coin flips.
const POLICY_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown Byzantine policy `{0}`")]
    Unknown(String),
    #[error("cannot read script {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("script line {line}: {reason}")]
    Script { line: usize, reason: String },
    #[error("script wrote to honest node {0}")]
    HonestWrite(NodeId),
    #[error("script wrote to Byzantine node {0}, which was not activated")]
    NotActivated(NodeId),
    #[error("script wrote twice to node {0}")]
    DuplicateWrite(NodeId),
}

/// Full-knowledge adversary. Receives the whole configuration and the
/// activated Byzantine nodes; returns new local states for some of them.
pub trait ByzantineScript: Send {
    fn act(
        &mut self,
        g: &Graph,
        cfg: &Configuration,
        step: u64,
        activated: &[NodeId],
    ) -> Vec<(NodeId, LocalState)>;
}

impl<F> ByzantineScript for F
where
    F: FnMut(&Graph, &Configuration, u64, &[NodeId]) -> Vec<(NodeId, LocalState)> + Send,
{
    fn act(
        &mut self,
        g: &Graph,
        cfg: &Configuration,
        step: u64,
        activated: &[NodeId],
    ) -> Vec<(NodeId, LocalState)> {
        self(g, cfg, step, activated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SOp {
    Set(bool),
    Negate,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum XOp {
    Set(u32),
    Degree,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct ScriptLine {
    step: Option<u64>,
    node: Option<NodeId>,
    s: SOp,
    x: XOp,
}

/// Line-based script: `<step|*> <node|*> <s> <x>` where `s` is `0`, `1`,
/// `!` (negate) or `=` (keep) and `x` is a number, `max`, `deg` or `keep`.
/// `#` starts a comment. For each activated Byzantine node the first
/// matching line applies; no match means the node keeps its state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileScript {
    lines: Vec<ScriptLine>,
}

impl FileScript {
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| PolicyError::Script { line: i + 1, reason };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [step, node, s, x] = fields[..] else {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            };
            let step = match step {
                "*" => None,
                v => Some(v.parse().map_err(|_| err(format!("bad step `{v}`")))?),
            };
            let node = match node {
                "*" => None,
                v => Some(v.parse().map_err(|_| err(format!("bad node `{v}`")))?),
            };
            let s = match s {
                "0" => SOp::Set(false),
                "1" => SOp::Set(true),
                "!" => SOp::Negate,
                "=" => SOp::Keep,
                v => return Err(err(format!("bad s operation `{v}`"))),
            };
            let x = match x {
                "max" => XOp::Set(X_MAX),
                "deg" => XOp::Degree,
                "keep" => XOp::Keep,
                v => XOp::Set(v.parse().map_err(|_| err(format!("bad x operation `{v}`")))?),
            };
            lines.push(ScriptLine { step, node, s, x });
        }
        Ok(FileScript { lines })
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|source| PolicyError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Lines naming an honest node still produce a write so that the caller
    /// rejects the script. Lines naming an idle Byzantine node are skipped.
    fn writes(
        &self,
        g: &Graph,
        cfg: &Configuration,
        step: u64,
        activated: &[NodeId],
    ) -> Vec<(NodeId, LocalState)> {
        let mut out: Vec<(NodeId, LocalState)> = Vec::new();
        let done = |u: NodeId, l: &ScriptLine, out: &mut Vec<(NodeId, LocalState)>| {
            if out.iter().any(|&(v, _)| v == u) {
                return;
            }
            let cur = cfg.state(u);
            let candidate = match l.s {
                SOp::Set(b) => b,
                SOp::Negate => !cur.candidate,
                SOp::Keep => cur.candidate,
            };
            let x = match l.x {
                XOp::Set(v) => v,
                XOp::Degree => g.degree(u).min(X_MAX as usize) as u32,
                XOp::Keep => cur.x,
            };
            out.push((u, LocalState::new(candidate, x)));
        };
        for l in &self.lines {
            if l.step.is_some_and(|s| s != step) {
                continue;
            }
            match l.node {
                Some(u) if u >= g.node_count() || !g.is_byzantine(u) => {
                    out.push((u, LocalState::new(false, 0)));
                }
                Some(u) if !activated.contains(&u) => {}
                Some(u) => done(u, l, &mut out),
                None => {
                    for &u in activated {
                        done(u, l, &mut out);
                    }
                }
            }
        }
        out
    }
}

impl ByzantineScript for FileScript {
    fn act(
        &mut self,
        g: &Graph,
        cfg: &Configuration,
        step: u64,
        activated: &[NodeId],
    ) -> Vec<(NodeId, LocalState)> {
        self.writes(g, cfg, step, activated)
    }
}

/// Serializable description of a policy, as given on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    Silent,
    RandomFlip,
    Oscillator,
    MaxX,
    Script { path: PathBuf, script: FileScript },
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::Silent => f.write_str("silent"),
            PolicySpec::RandomFlip => f.write_str("flip"),
            PolicySpec::Oscillator => f.write_str("osc"),
            PolicySpec::MaxX => f.write_str("maxx"),
            PolicySpec::Script { path, .. } => write!(f, "script:{}", path.display()),
        }
    }
}

/// `script:<file>` reads and parses the file.
impl FromStr for PolicySpec {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "silent" => Ok(PolicySpec::Silent),
            "flip" => Ok(PolicySpec::RandomFlip),
            "osc" => Ok(PolicySpec::Oscillator),
            "maxx" => Ok(PolicySpec::MaxX),
            other => match other.strip_prefix("script:") {
                Some(path) => {
                    let path = PathBuf::from(path);
                    let script = FileScript::load(&path)?;
                    Ok(PolicySpec::Script { path, script })
                }
                None => Err(PolicyError::Unknown(other.into())),
            },
        }
    }
}

enum Kind {
    Silent,
    RandomFlip,
    Oscillator,
    MaxX,
    Scripted(Box<dyn ByzantineScript>),
}

/// Runtime Byzantine behaviour with its own randomness.
pub struct ByzantinePolicy {
    kind: Kind,
    rng: ChaCha8Rng,
}

impl fmt::Debug for ByzantinePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            Kind::Silent => "silent",
            Kind::RandomFlip => "flip",
            Kind::Oscillator => "osc",
            Kind::MaxX => "maxx",
            Kind::Scripted(_) => "script",
        };
        f.debug_struct("ByzantinePolicy").field("kind", &name).finish()
    }
}

impl ByzantinePolicy {
    pub fn new(spec: &PolicySpec, seed: u64) -> Self {
        let kind = match spec {
            PolicySpec::Silent => Kind::Silent,
            PolicySpec::RandomFlip => Kind::RandomFlip,
            PolicySpec::Oscillator => Kind::Oscillator,
            PolicySpec::MaxX => Kind::MaxX,
            PolicySpec::Script { script, .. } => Kind::Scripted(Box::new(script.clone())),
        };
        Self::with_kind(kind, seed)
    }

    pub fn scripted(script: impl ByzantineScript + 'static) -> Self {
        Self::with_kind(Kind::Scripted(Box::new(script)), 0)
    }

    fn with_kind(kind: Kind, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(POLICY_STREAM);
        ByzantinePolicy { kind, rng }
    }

    pub fn act(
        &mut self,
        g: &Graph,
        cfg: &Configuration,
        step: u64,
        activated: &[NodeId],
    ) -> Result<Vec<ByzantineUpdate>, PolicyError> {
        byz_act(self, g, cfg, step, activated)
    }
}

/// One update per activated Byzantine node (`new_state: None` keeps the
/// state). Built-in policies only touch activated nodes; scripted writes
/// anywhere else are rejected.
pub fn byz_act(
    policy: &mut ByzantinePolicy,
    g: &Graph,
    cfg: &Configuration,
    step: u64,
    activated: &[NodeId],
) -> Result<Vec<ByzantineUpdate>, PolicyError> {
    let mut updates: Vec<ByzantineUpdate> = activated
        .iter()
        .map(|&node| ByzantineUpdate {
            node,
            new_state: None,
        })
        .collect();
    if let Some(&u) = activated
        .iter()
        .find(|&&u| u >= g.node_count() || !g.is_byzantine(u))
    {
        return Err(PolicyError::HonestWrite(u));
    }
    match &mut policy.kind {
        Kind::Silent => {}
        Kind::RandomFlip => {
            for up in &mut updates {
                let cur = cfg.state(up.node);
                up.new_state = Some(LocalState::new(policy.rng.random_bool(0.5), cur.x));
            }
        }
        Kind::Oscillator => {
            for up in &mut updates {
                let cur = cfg.state(up.node);
                up.new_state = Some(LocalState::new(!cur.candidate, cur.x));
            }
        }
        Kind::MaxX => {
            for up in &mut updates {
                up.new_state = Some(LocalState::new(true, X_MAX));
            }
        }
        Kind::Scripted(script) => {
            for (u, state) in script.act(g, cfg, step, activated) {
                if u >= g.node_count() || !g.is_byzantine(u) {
                    return Err(PolicyError::HonestWrite(u));
                }
                let Some(up) = updates.iter_mut().find(|up| up.node == u) else {
                    return Err(PolicyError::NotActivated(u));
                };
                if up.new_state.replace(state).is_some() {
                    return Err(PolicyError::DuplicateWrite(u));
                }
            }
        }
    }
    Ok(updates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};

    fn setup() -> (Graph, Configuration) {
        let g = generate(GraphKind::Path, 4, 0.0, 0)
            .unwrap()
            .with_byzantine(&[0, 3])
            .unwrap();
        let cfg = Configuration::from_flags(&g, &[true, false, false, false]);
        (g, cfg)
    }

    fn states(updates: &[ByzantineUpdate]) -> Vec<Option<LocalState>> {
        updates.iter().map(|u| u.new_state).collect()
    }

    #[test]
    fn silent_keeps_everything() {
        let (g, cfg) = setup();
        let mut p = ByzantinePolicy::new(&PolicySpec::Silent, 1);
        assert_eq!(states(&p.act(&g, &cfg, 0, &[0, 3]).unwrap()), vec![None, None]);
    }

    #[test]
    fn oscillator_negates() {
        let (g, cfg) = setup();
        let mut p = ByzantinePolicy::new(&PolicySpec::Oscillator, 1);
        let up = p.act(&g, &cfg, 0, &[0]).unwrap();
        assert_eq!(states(&up), vec![Some(LocalState::new(false, 1))]);
    }

    #[test]
    fn max_x_advertiser() {
        let (g, cfg) = setup();
        let mut p = ByzantinePolicy::new(&PolicySpec::MaxX, 1);
        let up = p.act(&g, &cfg, 0, &[3]).unwrap();
        assert_eq!(states(&up), vec![Some(LocalState::new(true, X_MAX))]);
    }

    #[test]
    fn flip_is_seeded_and_keeps_x() {
        let (g, cfg) = setup();
        let run = |seed| {
            let mut p = ByzantinePolicy::new(&PolicySpec::RandomFlip, seed);
            (0..64)
                .map(|i| p.act(&g, &cfg, i, &[0]).unwrap()[0].new_state.unwrap())
                .collect::<Vec<_>>()
        };
        let a = run(5);
        assert_eq!(a, run(5));
        assert!(a.iter().all(|s| s.x == 1));
        assert!(a.iter().any(|s| s.candidate) && a.iter().any(|s| !s.candidate));
    }

    #[test]
    fn closure_scripts_are_checked() {
        let (g, cfg) = setup();
        let mut honest = ByzantinePolicy::scripted(|_: &Graph, _: &Configuration, _: u64, _: &[NodeId]| {
            vec![(1, LocalState::new(true, 0))]
        });
        assert!(matches!(
            honest.act(&g, &cfg, 0, &[0]),
            Err(PolicyError::HonestWrite(1))
        ));

        let mut idle = ByzantinePolicy::scripted(|_: &Graph, _: &Configuration, _: u64, _: &[NodeId]| {
            vec![(3, LocalState::new(true, 0))]
        });
        assert!(matches!(
            idle.act(&g, &cfg, 0, &[0]),
            Err(PolicyError::NotActivated(3))
        ));

        // Reads the whole configuration: mirrors the honest neighbour's flag.
        let mut mirror =
            ByzantinePolicy::scripted(|g: &Graph, cfg: &Configuration, _: u64, act: &[NodeId]| {
                act.iter()
                    .map(|&b| (b, LocalState::new(!cfg.candidate(g.neighbors(b)[0]), 0)))
                    .collect()
            });
        let up = mirror.act(&g, &cfg, 0, &[0, 3]).unwrap();
        assert_eq!(
            states(&up),
            vec![Some(LocalState::new(true, 0)), Some(LocalState::new(true, 0))]
        );
    }

    #[test]
    fn file_script() {
        let (g, cfg) = setup();
        let script =
            FileScript::parse("# oscillate node 0, node 3 pins max x at step 2\n2 3 1 max\n* * ! keep\n")
                .unwrap();
        let mut p = ByzantinePolicy::scripted(script.clone());
        let up = p.act(&g, &cfg, 2, &[0, 3]).unwrap();
        assert_eq!(
            states(&up),
            vec![
                Some(LocalState::new(false, 1)),
                Some(LocalState::new(true, X_MAX))
            ]
        );
        let up = p.act(&g, &cfg, 5, &[3]).unwrap();
        assert_eq!(states(&up), vec![Some(LocalState::new(true, 1))]);

        let bad = FileScript::parse("* 1 1 deg\n").unwrap();
        let mut p = ByzantinePolicy::scripted(bad);
        assert!(matches!(
            p.act(&g, &cfg, 0, &[0]),
            Err(PolicyError::HonestWrite(1))
        ));

        assert!(matches!(
            FileScript::parse("1 2 3\n"),
            Err(PolicyError::Script { line: 1, .. })
        ));
        assert!(matches!(
            FileScript::parse("\n* 0 ? keep"),
            Err(PolicyError::Script { line: 2, .. })
        ));
    }

    #[test]
    fn spec_parsing() {
        for s in ["silent", "flip", "osc", "maxx"] {
            assert_eq!(s.parse::<PolicySpec>().unwrap().to_string(), s);
        }
        assert!(matches!(
            "nice".parse::<PolicySpec>(),
            Err(PolicyError::Unknown(_))
        ));
        assert!(matches!(
            "script:/nonexistent/file".parse::<PolicySpec>(),
            Err(PolicyError::Io { .. })
        ));
    }
}
