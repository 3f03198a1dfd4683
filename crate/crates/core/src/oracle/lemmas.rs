//! Exhaustive checks of the probability bounds the convergence arguments use.

use num_bigint::BigInt;
use num_traits::One;

use super::chain::{nonempty_subsets, outcome_distribution};
use super::mdp::min_daemon_probability;
use super::rational::{at_least_inv_e, Q};
use super::OracleError;
use crate::analysis::{candidate_view, compute_i, detect_vanish, is_legitimate_byz};
use crate::anonymous::AnonRule;
use crate::byzantine::ByzRule;
use crate::graph::{Graph, NodeId};
use crate::model::{
    apply_with_draws, enabled_moves, Algorithm, Configuration, LocalState, Move, MoveSet, Rule,
    TransitionRecord, X_MAX,
};

/// `P(some member locally alone | the component vanishes)` when every node of
/// the alive candidate set `component` executes Withdrawal? and nothing else
/// moves. The rest of the graph is `⊥`.
pub fn conditional_vanish_payoff(g: &Graph, component: &[NodeId]) -> Result<Q, OracleError> {
    let mut members = component.to_vec();
    members.sort_unstable();
    members.dedup();
    let mut flags = vec![false; g.node_count()];
    for &u in &members {
        if u >= g.node_count() || g.is_byzantine(u) {
            return Err(OracleError::NotAlive);
        }
        flags[u] = true;
    }
    let cfg = Configuration::from_flags(g, &flags);
    let view = candidate_view(g, &cfg);
    if !view.alive_components().any(|c| c == members.as_slice()) {
        return Err(OracleError::NotAlive);
    }
    let t = MoveSet::new(
        members
            .iter()
            .map(|&u| Move::new(u, Rule::Anon(AnonRule::WithdrawalQ)))
            .collect(),
    );
    let (mut vanish, mut grow) = (0u64, 0u64);
    for mask in 0u64..(1 << members.len()) {
        let draws: Vec<(NodeId, bool)> = members
            .iter()
            .enumerate()
            .map(|(i, &u)| (u, mask >> i & 1 == 1))
            .collect();
        let target = apply_with_draws(Algorithm::Anonymous, g, &cfg, &t, &draws, &[])
            .expect("withdrawals of an alive set are valid");
        let record = TransitionRecord {
            source: cfg.clone(),
            moves: t.clone(),
            draws,
            byzantine: Vec::new(),
            target,
        };
        let report = detect_vanish(g, &record).remove(0);
        if report.vanished {
            vanish += 1;
            grow += u64::from(report.beta_grew);
        }
    }
    Ok(Q::new(BigInt::from(grow), BigInt::from(vanish)))
}

/// Minimum over valid move sets containing `u`'s Candidacy? of the exact
/// probability that `u` ends `⊤` with every neighbour `⊥`. `None` if
/// Candidacy? is not enabled on `u`.
pub fn candidacy_success_min(g: &Graph, cfg: &Configuration, u: NodeId) -> Option<Q> {
    let own = Move::new(u, Rule::Byz(ByzRule::CandidacyQ));
    let moves = enabled_moves(Algorithm::Byzantine, g, cfg);
    if !moves.contains(&own) {
        return None;
    }
    let others: Vec<Move> = moves.into_iter().filter(|m| m.node != u).collect();
    let with_own = |extra: &MoveSet| {
        let mut all = extra.moves().to_vec();
        all.push(own);
        MoveSet::new(all)
    };
    std::iter::once(MoveSet::new(vec![own]))
        .chain(nonempty_subsets(&others).map(|t| with_own(&t)))
        .map(|t| {
            outcome_distribution(Algorithm::Byzantine, g, cfg, &t, &[])
                .into_iter()
                .filter(|(c, _)| c.candidate(u) && g.neighbors(u).iter().all(|&v| !c.candidate(v)))
                .map(|(_, p)| p)
                .sum::<Q>()
        })
        .min()
}

/// Every labelled simple graph on `n` nodes.
pub fn all_graphs(n: usize) -> impl Iterator<Item = Graph> {
    let pairs: Vec<(NodeId, NodeId)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    (0u64..(1 << pairs.len())).map(move |mask| {
        let edges: Vec<(NodeId, NodeId)> = pairs
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        Graph::new(n, &edges, &[]).expect("valid edge list")
    })
}

/// Every subset of `0..n`.
pub fn all_subsets(n: usize) -> impl Iterator<Item = Vec<NodeId>> {
    (0u64..(1 << n)).map(move |mask| (0..n).filter(|&u| mask >> u & 1 == 1).collect())
}

/// Degree-stabilized configurations: honest `x = deg`, every `s`, and each
/// Byzantine `x` drawn from `byz_x(deg)`.
pub fn degree_stabilized_configurations(g: &Graph, byz_x: impl Fn(u32) -> Vec<u32>) -> Vec<Configuration> {
    let mut out = vec![Vec::new()];
    for u in g.nodes() {
        let deg = g.degree(u) as u32;
        let xs = if g.is_byzantine(u) { byz_x(deg) } else { vec![deg] };
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<LocalState>| {
                let xs = xs.clone();
                [false, true].into_iter().flat_map(move |s| {
                    let prefix = prefix.clone();
                    xs.clone().into_iter().map(move |x| {
                        let mut p = prefix.clone();
                        p.push(LocalState::new(s, x));
                        p
                    })
                })
            })
            .collect();
    }
    out.into_iter().map(Configuration::new).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub cases: usize,
    /// Smallest observed ratio `value · (Δ + 1)`; the bound requires `≥ 1/e`.
    pub worst: Option<Q>,
    pub holds: bool,
}

impl LemmaCheck {
    pub(crate) fn new() -> Self {
        LemmaCheck {
            cases: 0,
            worst: None,
            holds: true,
        }
    }

    fn record(&mut self, scaled: Q) {
        self.cases += 1;
        if !at_least_inv_e(&scaled) {
            self.holds = false;
        }
        if self.worst.as_ref().is_none_or(|w| scaled < *w) {
            self.worst = Some(scaled);
        }
    }
}

/// Candidacy success bound on `g` with every Byzantine placement, every
/// degree-stabilized configuration (Byzantine `x ∈ {0, deg, X_MAX}`) and
/// every `u ∈ V_1` with Candidacy? enabled.
pub fn check_candidacy_success(g: &Graph) -> LemmaCheck {
    let mut check = LemmaCheck::new();
    for byz in all_subsets(g.node_count()) {
        let g = g.with_byzantine(&byz).expect("subset of nodes");
        check_candidacy_success_fixed(&g, &mut check);
    }
    check
}

pub(crate) fn check_candidacy_success_fixed(g: &Graph, check: &mut LemmaCheck) {
    let levels = g.level_sets();
    let delta = Q::from_integer(BigInt::from(g.max_degree() + 1));
    for cfg in degree_stabilized_configurations(g, |deg| vec![0, deg, X_MAX]) {
        for u in g.honest_nodes().filter(|&u| levels.contains(1, u)) {
            if let Some(p) = candidacy_success_min(g, &cfg, u) {
                check.record(p * &delta);
            }
        }
    }
}

/// Two-round growth of `I`: from every degree-stabilized, non-legitimate
/// configuration (Byzantine `x ∈ {deg, X_MAX}`), the minimum over daemon and
/// Byzantine choices of `P(I grows within two rounds)`.
pub fn check_two_round_growth(g: &Graph) -> Result<LemmaCheck, OracleError> {
    let mut check = LemmaCheck::new();
    let levels = g.level_sets();
    let delta = Q::from_integer(BigInt::from(g.max_degree() + 1));
    for cfg in degree_stabilized_configurations(g, |deg| vec![deg, X_MAX]) {
        if is_legitimate_byz(g, &levels, &cfg) {
            continue;
        }
        let base = compute_i(g, &levels, &cfg).len();
        let value = min_daemon_probability(Algorithm::Byzantine, g, &cfg, 2, |c| {
            compute_i(g, &levels, c).len() > base
        })?;
        check.record(value * &delta);
    }
    Ok(check)
}

/// `(k/(k+1))^k ≥ 1/e` for `1 ≤ k ≤ k_max`, in exact arithmetic.
pub fn fact_power_exact(k_max: u64) -> bool {
    (1..=k_max).all(|k| {
        let base = Q::new(BigInt::from(k), BigInt::from(k + 1));
        let mut pow = Q::one();
        for _ in 0..k {
            pow *= &base;
        }
        at_least_inv_e(&pow)
    })
}

/// Same inequality in floating point, as `k · ln(1 + 1/k) ≤ 1`, with a
/// rounding margin.
pub fn fact_power_float(k_max: u64) -> bool {
    (1..=k_max).all(|k| {
        let k = k as f64;
        k * (1.0 / k).ln_1p() + 1e-12 < 1.0
    })
}
