use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::rational::{solve, Q};
use super::OracleError;
use crate::anonymous::AnonRule;
use crate::byzantine::{self, ByzRule};
use crate::daemon::{conflict_moves, DaemonStrategy};
use crate::graph::Graph;
use crate::model::{
    apply_with_draws, enabled_moves, Algorithm, ByzantineUpdate, Configuration, Move, MoveSet, Rule,
};

pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// Schedulers the oracle can enumerate. Byzantine nodes are never activated
/// by them, so their states stay frozen.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainDaemon {
    Synchronous,
    SingleRandom,
    /// Each enabled move independently, conditioned on a non-empty set.
    RandomSubset(Q),
    ConflictPreserver,
    /// Every valid move set, without probabilities.
    All,
}

impl ChainDaemon {
    pub fn from_strategy(strategy: &DaemonStrategy) -> Result<Self, OracleError> {
        match strategy {
            DaemonStrategy::Synchronous => Ok(ChainDaemon::Synchronous),
            DaemonStrategy::SingleRandom => Ok(ChainDaemon::SingleRandom),
            DaemonStrategy::ConflictPreserver => Ok(ChainDaemon::ConflictPreserver),
            DaemonStrategy::RandomSubset { density } => Q::from_float(*density)
                .map(ChainDaemon::RandomSubset)
                .ok_or_else(|| OracleError::UnsupportedDaemon(strategy.to_string())),
            DaemonStrategy::Fair { .. } => Err(OracleError::UnsupportedDaemon(strategy.to_string())),
        }
    }
}

/// One daemon choice out of a state. `weight` is the daemon's probability
/// of making it, absent under [`ChainDaemon::All`].
#[derive(Debug, Clone, PartialEq)]
pub struct Choice {
    pub moves: MoveSet,
    pub weight: Option<Q>,
    /// Successor states with exact probabilities summing to 1.
    pub outcomes: Vec<(usize, Q)>,
}

#[derive(Debug, Clone)]
pub struct ExactChain {
    pub algorithm: Algorithm,
    pub graph: Graph,
    pub daemon: ChainDaemon,
    pub states: Vec<Configuration>,
    /// Empty for target states and for states with no enabled honest move.
    pub choices: Vec<Vec<Choice>>,
    pub target: Vec<bool>,
    index: HashMap<Configuration, usize>,
}

impl ExactChain {
    pub fn state_index(&self, cfg: &Configuration) -> Option<usize> {
        self.index.get(cfg).copied()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.choices[s].is_empty()
    }

    /// One-step distribution under a fixed daemon, merged over choices.
    pub fn transition_distribution(&self, s: usize) -> Result<Vec<(usize, Q)>, OracleError> {
        let mut merged: Vec<(usize, Q)> = Vec::new();
        for c in &self.choices[s] {
            let w = c.weight.as_ref().ok_or(OracleError::AllDaemon)?;
            for (t, p) in &c.outcomes {
                let mass = w * p;
                match merged.iter_mut().find(|(u, _)| u == t) {
                    Some((_, acc)) => *acc += mass,
                    None => merged.push((*t, mass)),
                }
            }
        }
        merged.sort_by_key(|&(t, _)| t);
        Ok(merged)
    }

    /// Every choice's outcomes, and under a fixed daemon the choice weights,
    /// sum to exactly 1.
    pub fn distributions_sum_to_one(&self) -> bool {
        self.choices.iter().all(|cs| {
            let outcomes_ok = cs
                .iter()
                .all(|c| c.outcomes.iter().map(|(_, p)| p).sum::<Q>() == Q::one());
            let weights_ok = cs.is_empty()
                || cs.iter().any(|c| c.weight.is_none())
                || cs.iter().filter_map(|c| c.weight.clone()).sum::<Q>() == Q::one();
            outcomes_ok && weights_ok
        })
    }

    fn successors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.choices[s]
            .iter()
            .flat_map(|c| c.outcomes.iter().map(|&(t, _)| t))
    }

    fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            for t in self.successors(s) {
                if !std::mem::replace(&mut seen[t], true) {
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    /// States within `region` from which some state of `goal` is reachable.
    fn can_reach(&self, region: &[bool], goal: &[bool]) -> Vec<bool> {
        let mut ok: Vec<bool> = (0..self.len()).map(|s| region[s] && goal[s]).collect();
        loop {
            let mut changed = false;
            for s in 0..self.len() {
                if region[s] && !ok[s] && self.successors(s).any(|t| ok[t]) {
                    ok[s] = true;
                    changed = true;
                }
            }
            if !changed {
                return ok;
            }
        }
    }
}

/// Exact outcome distribution of the honest move set `t` from `cfg`, with
/// Byzantine nodes untouched. Equal targets are merged.
pub fn outcome_distribution(
    algo: Algorithm,
    g: &Graph,
    cfg: &Configuration,
    t: &MoveSet,
    byz: &[ByzantineUpdate],
) -> Vec<(Configuration, Q)> {
    let coins: Vec<(usize, Q)> = t
        .moves()
        .iter()
        .filter_map(|m| move_probability_exact(g, cfg, *m).map(|p| (m.node, p)))
        .collect();
    let mut out: Vec<(Configuration, Q)> = Vec::new();
    for mask in 0u64..(1u64 << coins.len()) {
        let mut prob = Q::one();
        let mut draws = Vec::with_capacity(coins.len());
        for (i, (u, p)) in coins.iter().enumerate() {
            let d = mask >> i & 1 == 1;
            prob *= if d { p.clone() } else { Q::one() - p };
            draws.push((*u, d));
        }
        if prob.is_zero() {
            continue;
        }
        let target = apply_with_draws(algo, g, cfg, t, &draws, byz).expect("enumerated move sets are valid");
        match out.iter_mut().find(|(c, _)| *c == target) {
            Some((_, acc)) => *acc += prob,
            None => out.push((target, prob)),
        }
    }
    out
}

pub fn move_probability_exact(g: &Graph, cfg: &Configuration, m: Move) -> Option<Q> {
    match m.rule {
        Rule::Byz(ByzRule::CandidacyQ) => Some(byzantine::candidacy_probability_exact(g, cfg, m.node)),
        Rule::Anon(AnonRule::WithdrawalQ) => Some(Q::new(BigInt::one(), BigInt::from(2))),
        _ => None,
    }
}

/// Non-empty subsets of `moves`, in mask order.
pub(crate) fn nonempty_subsets(moves: &[Move]) -> impl Iterator<Item = MoveSet> + '_ {
    (1u64..(1u64 << moves.len())).map(move |mask| {
        moves
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask >> i & 1 == 1)
            .map(|(_, &m)| m)
            .collect()
    })
}

fn daemon_choices(daemon: &ChainDaemon, g: &Graph, moves: &[Move]) -> Vec<(MoveSet, Option<Q>)> {
    let k = moves.len();
    match daemon {
        ChainDaemon::Synchronous => vec![(MoveSet::new(moves.to_vec()), Some(Q::one()))],
        ChainDaemon::ConflictPreserver => {
            vec![(MoveSet::new(conflict_moves(g, moves)), Some(Q::one()))]
        }
        ChainDaemon::SingleRandom => {
            let w = Q::new(BigInt::one(), BigInt::from(k));
            moves
                .iter()
                .map(|&m| (MoveSet::new(vec![m]), Some(w.clone())))
                .collect()
        }
        ChainDaemon::RandomSubset(d) => {
            let miss = Q::one() - d;
            let norm = Q::one() - pow(&miss, k);
            nonempty_subsets(moves)
                .map(|t| {
                    let w = pow(d, t.len()) * pow(&miss, k - t.len()) / &norm;
                    (t, Some(w))
                })
                .collect()
        }
        ChainDaemon::All => nonempty_subsets(moves).map(|t| (t, None)).collect(),
    }
}

fn pow(x: &Q, e: usize) -> Q {
    (0..e).fold(Q::one(), |acc, _| acc * x)
}

/// Reachable configurations from `starts` under `daemon`. Target states are
/// not expanded.
pub fn build_chain(
    algo: Algorithm,
    g: &Graph,
    daemon: ChainDaemon,
    starts: &[Configuration],
    target: impl Fn(&Configuration) -> bool,
) -> Result<ExactChain, OracleError> {
    build_chain_with_cap(algo, g, daemon, starts, target, DEFAULT_STATE_CAP)
}

pub fn build_chain_with_cap(
    algo: Algorithm,
    g: &Graph,
    daemon: ChainDaemon,
    starts: &[Configuration],
    target: impl Fn(&Configuration) -> bool,
    cap: usize,
) -> Result<ExactChain, OracleError> {
    let mut chain = ExactChain {
        algorithm: algo,
        graph: g.clone(),
        daemon,
        states: Vec::new(),
        choices: Vec::new(),
        target: Vec::new(),
        index: HashMap::new(),
    };
    let mut queue = VecDeque::new();
    let intern = |chain: &mut ExactChain, cfg: Configuration, queue: &mut VecDeque<usize>| {
        if let Some(&i) = chain.index.get(&cfg) {
            return Ok(i);
        }
        if chain.states.len() >= cap {
            return Err(OracleError::CapExceeded {
                cap,
                explored: chain.states.len(),
            });
        }
        let i = chain.states.len();
        chain.target.push(target(&cfg));
        chain.index.insert(cfg.clone(), i);
        chain.states.push(cfg);
        chain.choices.push(Vec::new());
        queue.push_back(i);
        Ok(i)
    };
    for cfg in starts {
        if cfg.len() != g.node_count() {
            return Err(OracleError::SizeMismatch {
                expected: g.node_count(),
                found: cfg.len(),
            });
        }
        intern(&mut chain, cfg.clone(), &mut queue)?;
    }
    while let Some(s) = queue.pop_front() {
        if chain.target[s] {
            continue;
        }
        let cfg = chain.states[s].clone();
        let moves = enabled_moves(algo, g, &cfg);
        if moves.is_empty() {
            continue;
        }
        let mut choices = Vec::new();
        for (t, weight) in daemon_choices(&chain.daemon, g, &moves) {
            let mut outcomes = Vec::new();
            for (next, p) in outcome_distribution(algo, g, &cfg, &t, &[]) {
                outcomes.push((intern(&mut chain, next, &mut queue)?, p));
            }
            choices.push(Choice {
                moves: t,
                weight,
                outcomes,
            });
        }
        chain.choices[s] = choices;
    }
    debug_assert!(chain.distributions_sum_to_one());
    Ok(chain)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Absorption {
    pub hit_probability: Q,
    /// `None` when the target is missed with positive probability.
    pub expected_steps: Option<Q>,
}

pub fn absorption(chain: &ExactChain, start: usize) -> Result<Absorption, OracleError> {
    let hit_probability = hit_probability(chain, start)?;
    let expected_steps = if hit_probability.is_one() {
        Some(expected_cost(chain, start, |_| Q::one())?.expect("target is hit almost surely"))
    } else {
        None
    };
    Ok(Absorption {
        hit_probability,
        expected_steps,
    })
}

fn hit_probability(chain: &ExactChain, start: usize) -> Result<Q, OracleError> {
    if chain.choices[start].iter().any(|c| c.weight.is_none()) {
        return Err(OracleError::AllDaemon);
    }
    if chain.target[start] {
        return Ok(Q::one());
    }
    let region = chain.reachable_from(start);
    let ok = chain.can_reach(&region, &chain.target);
    if !ok[start] {
        return Err(OracleError::Unreachable);
    }
    let unknown: Vec<usize> = (0..chain.len()).filter(|&s| ok[s] && !chain.target[s]).collect();
    let col = column_index(chain.len(), &unknown);
    let n = unknown.len();
    let mut a = vec![vec![Q::zero(); n]; n];
    let mut b = vec![vec![Q::zero()]; n];
    for (r, &s) in unknown.iter().enumerate() {
        a[r][r] += Q::one();
        for (t, p) in chain.transition_distribution(s)? {
            if chain.target[t] {
                b[r][0] += p;
            } else if let Some(c) = col[t] {
                a[r][c] -= p;
            }
        }
    }
    let x = solve(a, b).ok_or(OracleError::Unreachable)?;
    Ok(x[col[start].expect("start is unknown")][0].clone())
}

fn column_index(len: usize, unknown: &[usize]) -> Vec<Option<usize>> {
    let mut col = vec![None; len];
    for (i, &s) in unknown.iter().enumerate() {
        col[s] = Some(i);
    }
    col
}

/// Expected total of `cost(t)` over the transitions taken until a target
/// state is entered. `None` if the target is missed with positive probability.
pub fn expected_cost(
    chain: &ExactChain,
    start: usize,
    cost: impl Fn(&MoveSet) -> Q,
) -> Result<Option<Q>, OracleError> {
    if chain.target[start] {
        return Ok(Some(Q::zero()));
    }
    let region = chain.reachable_from(start);
    let ok = chain.can_reach(&region, &chain.target);
    if !ok[start] {
        return Err(OracleError::Unreachable);
    }
    if (0..chain.len()).any(|s| region[s] && !ok[s]) {
        return Ok(None);
    }
    let unknown: Vec<usize> = (0..chain.len())
        .filter(|&s| region[s] && !chain.target[s])
        .collect();
    let col = column_index(chain.len(), &unknown);
    let n = unknown.len();
    let mut a = vec![vec![Q::zero(); n]; n];
    let mut b = vec![vec![Q::zero()]; n];
    for (r, &s) in unknown.iter().enumerate() {
        a[r][r] += Q::one();
        for c in &chain.choices[s] {
            let w = c.weight.as_ref().ok_or(OracleError::AllDaemon)?;
            b[r][0] += w * cost(&c.moves);
        }
        for (t, p) in chain.transition_distribution(s)? {
            if let Some(c) = col[t] {
                a[r][c] -= p;
            }
        }
    }
    let x = solve(a, b).ok_or(OracleError::Unreachable)?;
    Ok(Some(x[col[start].expect("start is unknown")][0].clone()))
}

/// Probability of ending in each absorbing state (target or no enabled
/// move), sorted by state index.
pub fn absorption_distribution(chain: &ExactChain, start: usize) -> Result<Vec<(usize, Q)>, OracleError> {
    if chain.is_absorbing(start) {
        return Ok(vec![(start, Q::one())]);
    }
    let region = chain.reachable_from(start);
    let absorbing: Vec<bool> = (0..chain.len())
        .map(|s| region[s] && chain.is_absorbing(s))
        .collect();
    let ok = chain.can_reach(&region, &absorbing);
    if (0..chain.len()).any(|s| region[s] && !ok[s]) {
        return Err(OracleError::Unreachable);
    }
    let sinks: Vec<usize> = (0..chain.len()).filter(|&s| absorbing[s]).collect();
    let unknown: Vec<usize> = (0..chain.len()).filter(|&s| region[s] && !absorbing[s]).collect();
    let col = column_index(chain.len(), &unknown);
    let sink_col = column_index(chain.len(), &sinks);
    let n = unknown.len();
    let mut a = vec![vec![Q::zero(); n]; n];
    let mut b = vec![vec![Q::zero(); sinks.len()]; n];
    for (r, &s) in unknown.iter().enumerate() {
        a[r][r] += Q::one();
        for (t, p) in chain.transition_distribution(s)? {
            if let Some(c) = col[t] {
                a[r][c] -= p;
            } else if let Some(c) = sink_col[t] {
                b[r][c] += p;
            }
        }
    }
    let x = solve(a, b).ok_or(OracleError::Unreachable)?;
    let row = &x[col[start].expect("start is transient")];
    Ok(sinks.into_iter().zip(row.iter().cloned()).collect())
}
