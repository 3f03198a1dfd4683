//! Byzantine-tolerant MIS under the fair distributed daemon.
//!
//! ```text
//! Refresh      x_u ≠ deg(u)                          → x_u := deg(u)
//! Candidacy?   x_u = deg(u) ∧ s_u = ⊥ ∧ ∀v∈N(u) s_v = ⊥
//!                → if Rand(1 / (1 + max{x_v : v ∈ N[u]})) then s_u := ⊤
//! Withdrawal   x_u = deg(u) ∧ s_u = ⊤ ∧ ∃v∈N(u) s_v = ⊤ → s_u := ⊥
//! ```
//!
//! Guards read every neighbour, Byzantine ones included; a Byzantine
//! neighbour advertising a huge `x` lowers the candidacy probability.

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};

use crate::graph::{Graph, NodeId};
use crate::model::{Configuration, LocalState, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ByzRule {
    Refresh,
    CandidacyQ,
    Withdrawal,
}

fn degree_stable(g: &Graph, cfg: &Configuration, u: NodeId) -> bool {
    cfg.x(u) as usize == g.degree(u)
}

fn any_neighbor_candidate(g: &Graph, cfg: &Configuration, u: NodeId) -> bool {
    g.neighbors(u).iter().any(|&v| cfg.candidate(v))
}

pub fn guard(rule: ByzRule, g: &Graph, cfg: &Configuration, u: NodeId) -> bool {
    match rule {
        ByzRule::Refresh => !degree_stable(g, cfg, u),
        ByzRule::CandidacyQ => {
            degree_stable(g, cfg, u) && !cfg.candidate(u) && !any_neighbor_candidate(g, cfg, u)
        }
        ByzRule::Withdrawal => {
            degree_stable(g, cfg, u) && cfg.candidate(u) && any_neighbor_candidate(g, cfg, u)
        }
    }
}

pub fn enabled(g: &Graph, cfg: &Configuration, u: NodeId) -> Option<ByzRule> {
    if !degree_stable(g, cfg, u) {
        return Some(ByzRule::Refresh);
    }
    match (cfg.candidate(u), any_neighbor_candidate(g, cfg, u)) {
        (false, false) => Some(ByzRule::CandidacyQ),
        (true, true) => Some(ByzRule::Withdrawal),
        _ => None,
    }
}

fn closed_max_x(g: &Graph, cfg: &Configuration, u: NodeId) -> u32 {
    g.neighbors(u).iter().map(|&v| cfg.x(v)).fold(cfg.x(u), u32::max)
}

/// `1 / (1 + max{x_v : v ∈ N[u]})`, exact.
pub fn candidacy_probability(g: &Graph, cfg: &Configuration, u: NodeId) -> Ratio<u64> {
    Ratio::new(1, 1 + u64::from(closed_max_x(g, cfg, u)))
}

pub fn candidacy_probability_exact(g: &Graph, cfg: &Configuration, u: NodeId) -> BigRational {
    let p = candidacy_probability(g, cfg, u);
    BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom()))
}

pub fn candidacy_probability_f64(g: &Graph, cfg: &Configuration, u: NodeId) -> f64 {
    1.0 / (1.0 + f64::from(closed_max_x(g, cfg, u)))
}

/// New local state of `u`. `draw` must be present exactly for Candidacy?.
pub fn command(
    rule: ByzRule,
    g: &Graph,
    cfg: &Configuration,
    u: NodeId,
    draw: Option<bool>,
) -> Result<LocalState, ModelError> {
    let s = cfg.state(u);
    match (rule, draw) {
        (ByzRule::Refresh, None) => Ok(LocalState::new(s.candidate, g.degree(u) as u32)),
        (ByzRule::CandidacyQ, Some(d)) => Ok(LocalState::new(s.candidate || d, s.x)),
        (ByzRule::Withdrawal, None) => Ok(LocalState::new(false, s.x)),
        (ByzRule::CandidacyQ, None) => Err(ModelError::MissingDraw(u)),
        (_, Some(_)) => Err(ModelError::UnexpectedDraw(u)),
    }
}
