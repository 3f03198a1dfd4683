//! Schedulers and Byzantine behaviour.
//!
//! A daemon sees the whole configuration and picks which activable nodes act
//! in the next transition. Honest nodes contribute their enabled move;
//! Byzantine nodes are always activable and, once picked, hand control to a
//! [`ByzantinePolicy`].

mod fairness;
mod policy;

pub use fairness::{fairness_audit, FairnessLedger};
pub use policy::{byz_act, ByzantinePolicy, ByzantineScript, FileScript, PolicyError, PolicySpec};

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymous::AnonRule;
use crate::byzantine::ByzRule;
use crate::graph::{Graph, NodeId};
use crate::model::{activable_nodes, enabled_moves, Algorithm, Configuration, Move, MoveSet, Rule};

/// ChaCha stream reserved for scheduler choices, disjoint from node coins.
const DAEMON_STREAM: u64 = u64::MAX;

#[derive(Debug, Error, PartialEq)]
pub enum DaemonParseError {
    #[error("unknown daemon `{0}`")]
    Unknown(String),
    #[error("density must lie in (0, 1], got `{0}`")]
    Density(String),
    #[error("age bound must be a positive integer or `n`, got `{0}`")]
    Age(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DaemonStrategy {
    Synchronous,
    RandomSubset {
        density: f64,
    },
    SingleRandom,
    ConflictPreserver,
    /// `age_bound: None` stands for the node count.
    Fair {
        inner: Box<DaemonStrategy>,
        age_bound: Option<usize>,
    },
}

impl DaemonStrategy {
    pub fn fair(inner: DaemonStrategy, age_bound: Option<usize>) -> Self {
        DaemonStrategy::Fair {
            inner: Box::new(inner),
            age_bound,
        }
    }

    /// Effective age bound on `g`, if this strategy enforces one.
    pub fn age_bound(&self, g: &Graph) -> Option<usize> {
        match self {
            DaemonStrategy::Synchronous => Some(1),
            DaemonStrategy::Fair { age_bound, .. } => Some(age_bound.unwrap_or_else(|| g.node_count())),
            _ => None,
        }
    }
}

impl fmt::Display for DaemonStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DaemonStrategy::Synchronous => f.write_str("sync"),
            DaemonStrategy::RandomSubset { density } => write!(f, "rsubset:{density}"),
            DaemonStrategy::SingleRandom => f.write_str("single"),
            DaemonStrategy::ConflictPreserver => f.write_str("conflict"),
            DaemonStrategy::Fair { inner, age_bound } => match age_bound {
                Some(a) => write!(f, "fair:{inner}:{a}"),
                None => write!(f, "fair:{inner}:n"),
            },
        }
    }
}

impl FromStr for DaemonStrategy {
    type Err = DaemonParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "sync" => return Ok(DaemonStrategy::Synchronous),
            "single" => return Ok(DaemonStrategy::SingleRandom),
            "conflict" => return Ok(DaemonStrategy::ConflictPreserver),
            _ => {}
        }
        if let Some(d) = s.strip_prefix("rsubset:") {
            let density: f64 = d.parse().map_err(|_| DaemonParseError::Density(d.into()))?;
            if !(density > 0.0 && density <= 1.0) {
                return Err(DaemonParseError::Density(d.into()));
            }
            return Ok(DaemonStrategy::RandomSubset { density });
        }
        if let Some(rest) = s.strip_prefix("fair:") {
            let (inner, age) = rest
                .rsplit_once(':')
                .ok_or_else(|| DaemonParseError::Unknown(s.into()))?;
            let age_bound = match age {
                "n" => None,
                a => match a.parse::<usize>() {
                    Ok(v) if v >= 1 => Some(v),
                    _ => return Err(DaemonParseError::Age(a.into())),
                },
            };
            return Ok(DaemonStrategy::fair(inner.parse()?, age_bound));
        }
        Err(DaemonParseError::Unknown(s.into()))
    }
}

impl TryFrom<String> for DaemonStrategy {
    type Error = DaemonParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<DaemonStrategy> for String {
    fn from(d: DaemonStrategy) -> String {
        d.to_string()
    }
}

/// Honest moves plus activated Byzantine nodes for one transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub moves: MoveSet,
    pub byzantine: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    /// No honest node is activable and there are no Byzantine nodes.
    Stable,
    Step(Schedule),
}

/// A strategy together with its scheduler state.
#[derive(Debug, Clone)]
pub struct Daemon {
    strategy: DaemonStrategy,
    rng: ChaCha8Rng,
    ledger: FairnessLedger,
}

impl Daemon {
    pub fn new(strategy: DaemonStrategy, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(DAEMON_STREAM);
        Daemon {
            strategy,
            rng,
            ledger: FairnessLedger::default(),
        }
    }

    pub fn strategy(&self) -> &DaemonStrategy {
        &self.strategy
    }

    pub fn ledger(&self) -> &FairnessLedger {
        &self.ledger
    }

    pub fn select(&mut self, algo: Algorithm, g: &Graph, cfg: &Configuration) -> Selection {
        select_moves(self, algo, g, cfg)
    }
}

/// One scheduling decision. Ages are refreshed from `cfg` before choosing and
/// reset for every node picked.
pub fn select_moves(daemon: &mut Daemon, algo: Algorithm, g: &Graph, cfg: &Configuration) -> Selection {
    let activable = activable_nodes(algo, g, cfg);
    daemon.ledger.observe(&activable);
    let moves = enabled_moves(algo, g, cfg);
    let units: Vec<NodeId> = g.nodes().filter(|&u| activable[u]).collect();
    if units.is_empty() {
        return Selection::Stable;
    }
    let ctx = Context {
        g,
        moves: &moves,
        units: &units,
    };
    let mut picked = vec![false; g.node_count()];
    choose(
        &daemon.strategy,
        &ctx,
        &mut daemon.rng,
        &daemon.ledger,
        &mut picked,
    );
    debug_assert!(picked.iter().any(|&p| p));

    let chosen: Vec<NodeId> = g.nodes().filter(|&u| picked[u]).collect();
    daemon.ledger.activated(chosen.iter().copied());
    Selection::Step(Schedule {
        moves: moves.iter().copied().filter(|m| picked[m.node]).collect(),
        byzantine: chosen.into_iter().filter(|&u| g.is_byzantine(u)).collect(),
    })
}

struct Context<'a> {
    g: &'a Graph,
    moves: &'a [Move],
    /// Activable nodes, sorted; never empty.
    units: &'a [NodeId],
}

fn choose(
    strategy: &DaemonStrategy,
    ctx: &Context<'_>,
    rng: &mut ChaCha8Rng,
    ledger: &FairnessLedger,
    picked: &mut [bool],
) {
    match strategy {
        DaemonStrategy::Synchronous => {
            for &u in ctx.units {
                picked[u] = true;
            }
        }
        DaemonStrategy::RandomSubset { density } => loop {
            let mut any = false;
            for &u in ctx.units {
                if rng.random_bool(*density) {
                    picked[u] = true;
                    any = true;
                }
            }
            if any {
                break;
            }
        },
        DaemonStrategy::SingleRandom => {
            picked[ctx.units[rng.random_range(0..ctx.units.len())]] = true;
        }
        DaemonStrategy::ConflictPreserver => {
            let mut any = false;
            for &u in ctx.units {
                if ctx.g.is_byzantine(u) || prolongs_conflict(ctx.g, ctx.moves, u) {
                    picked[u] = true;
                    any = true;
                }
            }
            if !any {
                for &u in ctx.units {
                    picked[u] = true;
                }
            }
        }
        DaemonStrategy::Fair { inner, age_bound } => {
            let bound = age_bound.unwrap_or(ctx.g.node_count());
            for u in ledger.overdue(bound) {
                picked[u] = true;
            }
            choose(inner, ctx, rng, ledger, picked);
        }
    }
}

fn rule_at(moves: &[Move], u: NodeId) -> Option<Rule> {
    moves
        .binary_search_by_key(&u, |m| m.node)
        .ok()
        .map(|i| moves[i].rule)
}

fn is_candidacy(r: Option<Rule>) -> bool {
    matches!(
        r,
        Some(Rule::Anon(AnonRule::Candidacy)) | Some(Rule::Byz(ByzRule::CandidacyQ))
    )
}

/// Withdrawals keep candidates colliding; a candidacy next to another enabled
/// candidacy creates a fresh ⊤-⊤ edge. Refresh is always taken.
fn prolongs_conflict(g: &Graph, moves: &[Move], u: NodeId) -> bool {
    match rule_at(moves, u) {
        Some(Rule::Anon(AnonRule::WithdrawalQ))
        | Some(Rule::Byz(ByzRule::Withdrawal))
        | Some(Rule::Byz(ByzRule::Refresh)) => true,
        r if is_candidacy(r) => g.neighbors(u).iter().any(|&v| is_candidacy(rule_at(moves, v))),
        _ => false,
    }
}

/// Honest part of the conflict-preserver's choice when Byzantine nodes are
/// left out. `moves` must be sorted by node.
pub(crate) fn conflict_moves(g: &Graph, moves: &[Move]) -> Vec<Move> {
    let picked: Vec<Move> = moves
        .iter()
        .copied()
        .filter(|m| prolongs_conflict(g, moves, m.node))
        .collect();
    if picked.is_empty() {
        moves.to_vec()
    } else {
        picked
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};
    use crate::model::is_valid_move_set;
    use proptest::prelude::*;

    fn all_strategies() -> Vec<DaemonStrategy> {
        vec![
            DaemonStrategy::Synchronous,
            DaemonStrategy::RandomSubset { density: 0.3 },
            DaemonStrategy::SingleRandom,
            DaemonStrategy::ConflictPreserver,
            DaemonStrategy::fair(DaemonStrategy::SingleRandom, Some(3)),
            DaemonStrategy::fair(DaemonStrategy::RandomSubset { density: 0.5 }, None),
        ]
    }

    #[test]
    fn parse_round_trip() {
        for s in [
            "sync",
            "rsubset:0.25",
            "single",
            "conflict",
            "fair:single:4",
            "fair:rsubset:0.5:n",
        ] {
            let d: DaemonStrategy = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert_eq!(
            "fair:fair:sync:2:3".parse::<DaemonStrategy>().unwrap(),
            DaemonStrategy::fair(
                DaemonStrategy::fair(DaemonStrategy::Synchronous, Some(2)),
                Some(3)
            )
        );
        assert!("rsubset:0".parse::<DaemonStrategy>().is_err());
        assert!("rsubset:1.5".parse::<DaemonStrategy>().is_err());
        assert!("fair:sync:0".parse::<DaemonStrategy>().is_err());
        assert!("fair:sync".parse::<DaemonStrategy>().is_err());
        assert!("lazy".parse::<DaemonStrategy>().is_err());
    }

    #[test]
    fn serde_as_string() {
        let d = DaemonStrategy::fair(DaemonStrategy::ConflictPreserver, Some(7));
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, "\"fair:conflict:7\"");
        assert_eq!(serde_json::from_str::<DaemonStrategy>(&json).unwrap(), d);
    }

    #[test]
    fn sync_on_conflicting_pair() {
        let k2 = generate(GraphKind::Complete, 2, 0.0, 0).unwrap();
        let cfg = Configuration::from_flags(&k2, &[true, true]);
        let mut d = Daemon::new(DaemonStrategy::Synchronous, 1);
        let Selection::Step(s) = d.select(Algorithm::Anonymous, &k2, &cfg) else {
            panic!("K2 with two candidates is not stable");
        };
        let w = Rule::Anon(AnonRule::WithdrawalQ);
        assert_eq!(s.moves, MoveSet::new(vec![Move::new(0, w), Move::new(1, w)]));
        assert!(s.byzantine.is_empty());
    }

    #[test]
    fn stable_signal_for_every_strategy() {
        let k2 = generate(GraphKind::Complete, 2, 0.0, 0).unwrap();
        let cfg = Configuration::from_flags(&k2, &[true, false]);
        for strategy in all_strategies() {
            let mut d = Daemon::new(strategy, 3);
            assert_eq!(d.select(Algorithm::Anonymous, &k2, &cfg), Selection::Stable);
            assert_eq!(d.select(Algorithm::Byzantine, &k2, &cfg), Selection::Stable);
        }
    }

    #[test]
    fn byzantine_node_keeps_schedule_alive() {
        let g = generate(GraphKind::Path, 3, 0.0, 0)
            .unwrap()
            .with_byzantine(&[0])
            .unwrap();
        let cfg = Configuration::from_flags(&g, &[false, false, true]);
        let mut d = Daemon::new(DaemonStrategy::SingleRandom, 0);
        let Selection::Step(s) = d.select(Algorithm::Byzantine, &g, &cfg) else {
            panic!("Byzantine nodes are always activable");
        };
        assert!(s.moves.is_empty());
        assert_eq!(s.byzantine, vec![0]);
    }

    #[test]
    fn fair_with_unit_age_is_synchronous() {
        let g = generate(GraphKind::Gnp, 12, 0.3, 5)
            .unwrap()
            .with_byzantine(&[4])
            .unwrap();
        let flags: Vec<bool> = (0..12).map(|u| u % 3 == 0).collect();
        let cfg = Configuration::from_flags(&g, &flags);
        let mut fair = Daemon::new(DaemonStrategy::fair(DaemonStrategy::SingleRandom, Some(1)), 9);
        let mut sync = Daemon::new(DaemonStrategy::Synchronous, 9);
        for algo in [Algorithm::Anonymous, Algorithm::Byzantine] {
            assert_eq!(fair.select(algo, &g, &cfg), sync.select(algo, &g, &cfg));
        }
    }

    #[test]
    fn fair_forces_overdue_nodes() {
        // Edgeless, all ⊥: every node stays Candidacy-enabled until picked.
        let g = Graph::new(6, &[], &[]).unwrap();
        let cfg = Configuration::from_flags(&g, &[false; 6]);
        let mut d = Daemon::new(DaemonStrategy::fair(DaemonStrategy::SingleRandom, Some(3)), 2);
        let mut last = [0usize; 6];
        for step in 1..=30 {
            let Selection::Step(s) = d.select(Algorithm::Anonymous, &g, &cfg) else {
                unreachable!()
            };
            for u in s.moves.nodes() {
                last[u] = step;
            }
            for (u, &l) in last.iter().enumerate() {
                assert!(step - l < 3, "node {u} skipped since {l} at {step}");
            }
        }
    }

    #[test]
    fn conflict_prefers_collisions() {
        // Path 0-1-2-3 with s = ⊤⊤⊥⊥: only the two withdrawals prolong conflicts;
        // node 3's candidacy sits next to no other enabled candidacy.
        let g = generate(GraphKind::Path, 4, 0.0, 0).unwrap();
        let cfg = Configuration::from_flags(&g, &[true, true, false, false]);
        let mut d = Daemon::new(DaemonStrategy::ConflictPreserver, 0);
        let Selection::Step(s) = d.select(Algorithm::Anonymous, &g, &cfg) else {
            unreachable!()
        };
        assert_eq!(s.moves.nodes().collect::<Vec<_>>(), vec![0, 1]);

        // All ⊥ on a path: every candidacy has an enabled neighbour.
        let cfg = Configuration::from_flags(&g, &[false; 4]);
        let Selection::Step(s) = d.select(Algorithm::Anonymous, &g, &cfg) else {
            unreachable!()
        };
        assert_eq!(s.moves.len(), 4);
    }

    proptest! {
        #[test]
        fn emitted_sets_are_valid(
            n in 1usize..14, p in 0.0f64..0.7, gseed in any::<u64>(), dseed in any::<u64>(),
            bits in any::<u64>(), byz in proptest::option::of(0usize..14), idx in 0usize..6,
        ) {
            let mut g = generate(GraphKind::Gnp, n, p, gseed).unwrap();
            if let Some(b) = byz.filter(|&b| b < n) {
                g = g.with_byzantine(&[b]).unwrap();
            }
            let flags: Vec<bool> = (0..n).map(|u| bits >> u & 1 == 1).collect();
            let mut cfg = Configuration::from_flags(&g, &flags);
            if bits >> 63 == 1 {
                let s = cfg.state(0);
                cfg.set(0, crate::model::LocalState::new(s.candidate, s.x + 1));
            }
            let strategy = all_strategies()[idx].clone();
            for algo in [Algorithm::Anonymous, Algorithm::Byzantine] {
                let mut d = Daemon::new(strategy.clone(), dseed);
                match d.select(algo, &g, &cfg) {
                    Selection::Stable => {
                        prop_assert!(g.byzantine_count() == 0);
                        prop_assert!(enabled_moves(algo, &g, &cfg).is_empty());
                    }
                    Selection::Step(s) => {
                        prop_assert!(s.moves.is_empty() || is_valid_move_set(algo, &g, &cfg, &s.moves));
                        prop_assert!(!s.moves.is_empty() || !s.byzantine.is_empty());
                        prop_assert!(s.byzantine.iter().all(|&b| g.is_byzantine(b)));
                    }
                }
            }
        }
    }
}
