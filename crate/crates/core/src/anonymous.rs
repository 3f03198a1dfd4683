//! Anonymous MIS under the adversarial distributed daemon.
//!
//! ```text
//! Candidacy    s_u = ⊥ ∧ ∀v∈N(u) s_v = ⊥ → s_u := ⊤
//! Withdrawal?  s_u = ⊤ ∧ ∃v∈N(u) s_v = ⊤ → if Rand(1/2) then s_u := ⊥
//! ```

use crate::graph::{Graph, NodeId};
use crate::model::{Configuration, LocalState, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AnonRule {
    Candidacy,
    WithdrawalQ,
}

pub fn guard(rule: AnonRule, g: &Graph, cfg: &Configuration, u: NodeId) -> bool {
    enabled(g, cfg, u) == Some(rule)
}

pub fn enabled(g: &Graph, cfg: &Configuration, u: NodeId) -> Option<AnonRule> {
    let conflict = g.neighbors(u).iter().any(|&v| cfg.candidate(v));
    match (cfg.candidate(u), conflict) {
        (false, false) => Some(AnonRule::Candidacy),
        (true, true) => Some(AnonRule::WithdrawalQ),
        _ => None,
    }
}

/// A draw of `true` on Withdrawal? means the node withdraws.
pub fn command(
    rule: AnonRule,
    current: LocalState,
    u: NodeId,
    draw: Option<bool>,
) -> Result<LocalState, ModelError> {
    match (rule, draw) {
        (AnonRule::Candidacy, None) => Ok(LocalState::new(true, current.x)),
        (AnonRule::WithdrawalQ, Some(d)) => Ok(LocalState::new(current.candidate && !d, current.x)),
        (AnonRule::WithdrawalQ, None) => Err(ModelError::MissingDraw(u)),
        (AnonRule::Candidacy, Some(_)) => Err(ModelError::UnexpectedDraw(u)),
    }
}
