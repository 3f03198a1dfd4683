//! Shared-memory state model: configurations, moves, simultaneous
//! transitions and executions.

mod rng;
mod trace;

pub use rng::RandomStream;
pub use trace::{parse_trace, replay, ExecutionTrace, TraceError};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anonymous::{self, AnonRule};
use crate::byzantine::{self, ByzRule};
use crate::graph::{Graph, NodeId};

/// Upper bound on any `x` value, including values written by Byzantine nodes.
pub const X_MAX: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("rule {rule} does not belong to the {algorithm} algorithm")]
    ForeignRule { rule: Rule, algorithm: Algorithm },
    #[error("node {0} is Byzantine and has no rules")]
    ByzantineQuery(NodeId),
    #[error("invalid move set: {0}")]
    InvalidMoveSet(String),
    #[error("transition activates no node")]
    EmptyTransition,
    #[error("Byzantine update targets honest node {0}")]
    HonestByzantineUpdate(NodeId),
    #[error("node {0} appears twice among Byzantine updates")]
    DuplicateByzantineUpdate(NodeId),
    #[error("move on node {0} needs a coin draw")]
    MissingDraw(NodeId),
    #[error("node {0} has a coin draw but its rule is deterministic")]
    UnexpectedDraw(NodeId),
    #[error("configuration has {got} entries, graph has {expected} nodes")]
    SizeMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Refresh / Candidacy? / Withdrawal, tolerant to Byzantine nodes under a
    /// fair daemon.
    #[serde(rename = "byz")]
    Byzantine,
    /// Candidacy / Withdrawal?, for anonymous networks under any daemon.
    #[serde(rename = "anon")]
    Anonymous,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Byzantine => "byz",
            Algorithm::Anonymous => "anon",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "byz" => Ok(Algorithm::Byzantine),
            "anon" => Ok(Algorithm::Anonymous),
            other => Err(format!("unknown algorithm `{other}` (expected byz or anon)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Byz(ByzRule),
    Anon(AnonRule),
}

impl Rule {
    pub fn algorithm(self) -> Algorithm {
        match self {
            Rule::Byz(_) => Algorithm::Byzantine,
            Rule::Anon(_) => Algorithm::Anonymous,
        }
    }

    /// Whether the command flips a coin.
    pub fn is_probabilistic(self) -> bool {
        matches!(
            self,
            Rule::Byz(ByzRule::CandidacyQ) | Rule::Anon(AnonRule::WithdrawalQ)
        )
    }

    pub fn all(algo: Algorithm) -> &'static [Rule] {
        match algo {
            Algorithm::Byzantine => &[
                Rule::Byz(ByzRule::Refresh),
                Rule::Byz(ByzRule::CandidacyQ),
                Rule::Byz(ByzRule::Withdrawal),
            ],
            Algorithm::Anonymous => &[Rule::Anon(AnonRule::Candidacy), Rule::Anon(AnonRule::WithdrawalQ)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rule::Byz(ByzRule::Refresh) => "REFRESH",
            Rule::Byz(ByzRule::CandidacyQ) => "CANDIDACY?",
            Rule::Byz(ByzRule::Withdrawal) => "WITHDRAWAL",
            Rule::Anon(AnonRule::Candidacy) => "CANDIDACY",
            Rule::Anon(AnonRule::WithdrawalQ) => "WITHDRAWAL?",
        }
    }

    pub fn parse(algo: Algorithm, name: &str) -> Option<Rule> {
        Rule::all(algo).iter().copied().find(|r| r.name() == name)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Local state of one node: the candidacy flag `s` (true = ⊤) and the
/// advertised degree `x`. The anonymous algorithm carries `x` but never reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LocalState {
    pub candidate: bool,
    pub x: u32,
}

impl LocalState {
    pub fn new(candidate: bool, x: u32) -> Self {
        LocalState { candidate, x }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    states: Vec<LocalState>,
}

impl Configuration {
    pub fn new(states: Vec<LocalState>) -> Self {
        Configuration { states }
    }

    /// Every node `⊥` with `x = deg`.
    pub fn degree_stabilized(g: &Graph) -> Self {
        Configuration::from_flags(g, &vec![false; g.node_count()])
    }

    /// Given flags, `x = deg` everywhere.
    pub fn from_flags(g: &Graph, flags: &[bool]) -> Self {
        Configuration {
            states: g
                .nodes()
                .map(|u| LocalState::new(flags[u], g.degree(u) as u32))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, u: NodeId) -> LocalState {
        self.states[u]
    }

    pub fn candidate(&self, u: NodeId) -> bool {
        self.states[u].candidate
    }

    pub fn x(&self, u: NodeId) -> u32 {
        self.states[u].x
    }

    pub fn set(&mut self, u: NodeId, state: LocalState) {
        self.states[u] = state;
    }

    pub fn states(&self) -> &[LocalState] {
        &self.states
    }

    pub fn flags(&self) -> Vec<bool> {
        self.states.iter().map(|s| s.candidate).collect()
    }

    /// `s` vector as a string of `0`/`1`.
    pub fn flag_string(&self) -> String {
        self.states
            .iter()
            .map(|s| if s.candidate { '1' } else { '0' })
            .collect()
    }

    fn check_size(&self, g: &Graph) -> Result<(), ModelError> {
        if self.len() != g.node_count() {
            return Err(ModelError::SizeMismatch {
                expected: g.node_count(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Move {
    pub node: NodeId,
    pub rule: Rule,
}

impl Move {
    pub fn new(node: NodeId, rule: Rule) -> Self {
        Move { node, rule }
    }
}

/// Moves kept sorted by node. Construction does not validate; see
/// [`is_valid_move_set`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MoveSet {
    moves: Vec<Move>,
}

impl MoveSet {
    pub fn new(mut moves: Vec<Move>) -> Self {
        moves.sort();
        MoveSet { moves }
    }

    pub fn empty() -> Self {
        MoveSet::default()
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// `V(t)`.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.moves.iter().map(|m| m.node)
    }

    pub fn contains_node(&self, u: NodeId) -> bool {
        self.moves.binary_search_by_key(&u, |m| m.node).is_ok()
    }

    pub fn rule_of(&self, u: NodeId) -> Option<Rule> {
        self.moves
            .binary_search_by_key(&u, |m| m.node)
            .ok()
            .map(|i| self.moves[i].rule)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Move) -> bool) -> MoveSet {
        MoveSet {
            moves: self.moves.iter().copied().filter(|m| keep(m)).collect(),
        }
    }
}

impl FromIterator<Move> for MoveSet {
    fn from_iter<I: IntoIterator<Item = Move>>(iter: I) -> Self {
        MoveSet::new(iter.into_iter().collect())
    }
}

/// An activated Byzantine node and what it wrote (`None`: kept its state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ByzantineUpdate {
    pub node: NodeId,
    pub new_state: Option<LocalState>,
}

/// `(γ, t, γ')` plus the coins that were drawn and the Byzantine activity
/// folded into the same step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRecord {
    pub source: Configuration,
    pub moves: MoveSet,
    /// One entry per probabilistic move, sorted by node.
    pub draws: Vec<(NodeId, bool)>,
    pub byzantine: Vec<ByzantineUpdate>,
    pub target: Configuration,
}

impl TransitionRecord {
    /// Honest movers and activated Byzantine nodes.
    pub fn activated(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.moves.nodes().chain(self.byzantine.iter().map(|b| b.node))
    }

    pub fn draw(&self, u: NodeId) -> Option<bool> {
        self.draws
            .binary_search_by_key(&u, |&(n, _)| n)
            .ok()
            .map(|i| self.draws[i].1)
    }
}

/// The enabled rule on an honest node, if any. Always `None` on Byzantine
/// nodes. Guards of both algorithms are mutually exclusive.
pub fn enabled_rule(algo: Algorithm, g: &Graph, cfg: &Configuration, u: NodeId) -> Option<Rule> {
    if g.is_byzantine(u) {
        return None;
    }
    match algo {
        Algorithm::Byzantine => byzantine::enabled(g, cfg, u).map(Rule::Byz),
        Algorithm::Anonymous => anonymous::enabled(g, cfg, u).map(Rule::Anon),
    }
}

/// Set of enabled rules on honest node `u`; at most one element.
pub fn enabled_rules(
    algo: Algorithm,
    g: &Graph,
    cfg: &Configuration,
    u: NodeId,
) -> Result<Vec<Rule>, ModelError> {
    if g.is_byzantine(u) {
        return Err(ModelError::ByzantineQuery(u));
    }
    let rules: Vec<Rule> = Rule::all(algo)
        .iter()
        .copied()
        .filter(|&r| guard(g, cfg, u, r))
        .collect();
    assert!(rules.len() <= 1, "guards overlap on node {u}: {rules:?}");
    Ok(rules)
}

/// Guard of `rule` on honest node `u`.
pub fn guard(g: &Graph, cfg: &Configuration, u: NodeId, rule: Rule) -> bool {
    match rule {
        Rule::Byz(r) => byzantine::guard(r, g, cfg, u),
        Rule::Anon(r) => anonymous::guard(r, g, cfg, u),
    }
}

/// Byzantine nodes are always activable.
pub fn is_activable(algo: Algorithm, g: &Graph, cfg: &Configuration, u: NodeId) -> bool {
    g.is_byzantine(u) || enabled_rule(algo, g, cfg, u).is_some()
}

pub fn activable_nodes(algo: Algorithm, g: &Graph, cfg: &Configuration) -> Vec<bool> {
    g.nodes().map(|u| is_activable(algo, g, cfg, u)).collect()
}

/// Every possible honest move in `cfg`, one per activable honest node.
pub fn enabled_moves(algo: Algorithm, g: &Graph, cfg: &Configuration) -> Vec<Move> {
    g.nodes()
        .filter_map(|u| enabled_rule(algo, g, cfg, u).map(|r| Move::new(u, r)))
        .collect()
}

/// Non-empty, every move possible, at most one move per node.
pub fn is_valid_move_set(algo: Algorithm, g: &Graph, cfg: &Configuration, t: &MoveSet) -> bool {
    validate_move_set(algo, g, cfg, t).is_ok()
}

fn validate_move_set(algo: Algorithm, g: &Graph, cfg: &Configuration, t: &MoveSet) -> Result<(), ModelError> {
    if t.is_empty() {
        return Err(ModelError::InvalidMoveSet("empty".into()));
    }
    cfg.check_size(g)?;
    for pair in t.moves().windows(2) {
        if pair[0].node == pair[1].node {
            return Err(ModelError::InvalidMoveSet(format!(
                "two moves on node {}",
                pair[0].node
            )));
        }
    }
    for m in t.moves() {
        if m.rule.algorithm() != algo {
            return Err(ModelError::ForeignRule {
                rule: m.rule,
                algorithm: algo,
            });
        }
        if m.node >= g.node_count() {
            return Err(ModelError::InvalidMoveSet(format!(
                "node {} out of range",
                m.node
            )));
        }
        if g.is_byzantine(m.node) {
            return Err(ModelError::ByzantineQuery(m.node));
        }
        if !guard(g, cfg, m.node, m.rule) {
            return Err(ModelError::InvalidMoveSet(format!(
                "{}:{} is not possible",
                m.node, m.rule
            )));
        }
    }
    Ok(())
}

fn validate_byzantine(g: &Graph, byz: &[ByzantineUpdate]) -> Result<(), ModelError> {
    let mut seen = vec![false; g.node_count()];
    for b in byz {
        if b.node >= g.node_count() || !g.is_byzantine(b.node) {
            return Err(ModelError::HonestByzantineUpdate(b.node));
        }
        if std::mem::replace(&mut seen[b.node], true) {
            return Err(ModelError::DuplicateByzantineUpdate(b.node));
        }
    }
    Ok(())
}

/// Success probability of a probabilistic move, evaluated on `cfg`.
pub fn move_probability(g: &Graph, cfg: &Configuration, m: Move) -> Option<f64> {
    match m.rule {
        Rule::Byz(ByzRule::CandidacyQ) => Some(byzantine::candidacy_probability_f64(g, cfg, m.node)),
        Rule::Anon(AnonRule::WithdrawalQ) => Some(0.5),
        _ => None,
    }
}

/// Simultaneous execution of `t` from `source` with the given coin outcomes.
/// Every guard and command reads `source` only. An empty `t` is accepted when
/// at least one Byzantine node is activated.
pub fn apply_with_draws(
    algo: Algorithm,
    g: &Graph,
    source: &Configuration,
    t: &MoveSet,
    draws: &[(NodeId, bool)],
    byz: &[ByzantineUpdate],
) -> Result<Configuration, ModelError> {
    source.check_size(g)?;
    if t.is_empty() && byz.is_empty() {
        return Err(ModelError::EmptyTransition);
    }
    if !t.is_empty() {
        validate_move_set(algo, g, source, t)?;
    }
    validate_byzantine(g, byz)?;

    let draw_of = |u: NodeId| draws.iter().find(|&&(n, _)| n == u).map(|&(_, d)| d);
    for &(u, _) in draws {
        match t.rule_of(u) {
            Some(r) if r.is_probabilistic() => {}
            _ => return Err(ModelError::UnexpectedDraw(u)),
        }
    }

    let mut target = source.clone();
    for m in t.moves() {
        let draw = draw_of(m.node);
        let next = match m.rule {
            Rule::Byz(r) => byzantine::command(r, g, source, m.node, draw)?,
            Rule::Anon(r) => anonymous::command(r, source.state(m.node), m.node, draw)?,
        };
        target.set(m.node, next);
    }
    for b in byz {
        if let Some(s) = b.new_state {
            target.set(b.node, s);
        }
    }
    Ok(target)
}

/// Draws the needed coins from the `(node, step)` substreams and applies `t`.
pub fn apply_transition(
    algo: Algorithm,
    g: &Graph,
    source: &Configuration,
    t: &MoveSet,
    byz: &[ByzantineUpdate],
    rng: &RandomStream,
    step: u64,
) -> Result<TransitionRecord, ModelError> {
    source.check_size(g)?;
    if !t.is_empty() {
        validate_move_set(algo, g, source, t)?;
    }
    let draws: Vec<(NodeId, bool)> = t
        .moves()
        .iter()
        .filter_map(|&m| move_probability(g, source, m).map(|p| (m.node, rng.bernoulli(m.node, step, p))))
        .collect();
    let target = apply_with_draws(algo, g, source, t, &draws, byz)?;
    Ok(TransitionRecord {
        source: source.clone(),
        moves: t.clone(),
        draws,
        byzantine: byz.to_vec(),
        target,
    })
}
