use thiserror::Error;

use super::{
    candidate_view, compute_beta, compute_i, detect_vanish, is_degree_stabilized, is_legitimate_byz,
};
use crate::anonymous::{self, AnonRule};
use crate::byzantine::{self, ByzRule};
use crate::graph::{Graph, LevelSets, NodeId};
use crate::model::{Configuration, Rule, TransitionRecord};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Violation {
    #[error("step {step}: node {node} left I")]
    IShrank { step: usize, node: NodeId },
    #[error("step {step}: node {node} left β")]
    BetaShrank { step: usize, node: NodeId },
    #[error("step {step}: {alive} alive candidate sets exceed n/2 - |β| with n = {n}, |β| = {beta}")]
    AliveCap {
        step: usize,
        alive: usize,
        beta: usize,
        n: usize,
    },
    #[error("step {step}: Candidacy-only transition neither grew β nor created a fresh alive set")]
    NewAlive { step: usize },
    #[error("step {step}: alive set {component:?} neither vanished nor kept an alive subset")]
    StayingAlive { step: usize, component: Vec<NodeId> },
    #[error("step {step}: Withdrawal? on {node} next to an enabled Candidacy")]
    NeighborExclusion { step: usize, node: NodeId },
    #[error("round {round}: configuration is not degree-stabilized")]
    DegreeNotStabilized { round: usize },
    #[error("round {round}: node {node} neither withdrew nor joined I")]
    WithdrawalProgress { round: usize, node: NodeId },
    #[error("round {round}: no Candidacy? around node {node}")]
    CandidacyProgress { round: usize, node: NodeId },
    #[error("round {round}: none of the three progress events occurred")]
    ThreeWayProgress { round: usize },
    #[error("step {step}: legitimacy was lost")]
    LegitimacyLost { step: usize },
    #[error("stable configuration whose β is not a maximal independent set")]
    StableNotMis,
}

impl Violation {
    /// Stable name of the violated property, for tallies.
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::IShrank { .. } => "i_monotone",
            Violation::BetaShrank { .. } => "beta_monotone",
            Violation::AliveCap { .. } => "alive_cap",
            Violation::NewAlive { .. } => "new_alive",
            Violation::StayingAlive { .. } => "staying_alive",
            Violation::NeighborExclusion { .. } => "neighbor_exclusion",
            Violation::DegreeNotStabilized { .. } => "degree_stabilized",
            Violation::WithdrawalProgress { .. } => "withdrawal_progress",
            Violation::CandidacyProgress { .. } => "candidacy_progress",
            Violation::ThreeWayProgress { .. } => "three_way_progress",
            Violation::LegitimacyLost { .. } => "closure",
            Violation::StableNotMis => "stable_not_mis",
        }
    }
}

fn first_lost(before: &[NodeId], after: &[NodeId]) -> Option<NodeId> {
    before.iter().copied().find(|u| after.binary_search(u).is_err())
}

pub fn check_i_monotone(
    g: &Graph,
    levels: &LevelSets,
    rec: &TransitionRecord,
    step: usize,
) -> Result<(), Violation> {
    let before = compute_i(g, levels, &rec.source);
    let after = compute_i(g, levels, &rec.target);
    match first_lost(&before, &after) {
        Some(node) => Err(Violation::IShrank { step, node }),
        None => Ok(()),
    }
}

pub fn check_beta_monotone(g: &Graph, rec: &TransitionRecord, step: usize) -> Result<(), Violation> {
    let before = compute_beta(g, &rec.source);
    let after = compute_beta(g, &rec.target);
    match first_lost(&before, &after) {
        Some(node) => Err(Violation::BetaShrank { step, node }),
        None => Ok(()),
    }
}

/// `alive ≤ n/2 - |β|`, compared as `2·alive + 2·|β| ≤ n`.
pub fn alive_cap_holds(g: &Graph, cfg: &Configuration, step: usize) -> Result<(), Violation> {
    let alive = candidate_view(g, cfg).alive_count();
    let beta = compute_beta(g, cfg).len();
    let n = g.node_count();
    if 2 * alive + 2 * beta <= n {
        Ok(())
    } else {
        Err(Violation::AliveCap { step, alive, beta, n })
    }
}

/// Anonymous algorithm: no enabled Withdrawal? has an enabled Candidacy next
/// to it.
pub fn check_neighbor_exclusion(g: &Graph, cfg: &Configuration, step: usize) -> Result<(), Violation> {
    for u in g.honest_nodes() {
        if anonymous::enabled(g, cfg, u) == Some(AnonRule::WithdrawalQ)
            && g.neighbors(u)
                .iter()
                .any(|&v| !g.is_byzantine(v) && anonymous::enabled(g, cfg, v) == Some(AnonRule::Candidacy))
        {
            return Err(Violation::NeighborExclusion { step, node: u });
        }
    }
    Ok(())
}

/// Only constrains transitions made of Candidacy moves alone.
pub fn check_new_alive(g: &Graph, rec: &TransitionRecord, step: usize) -> Result<(), Violation> {
    let candidacy_only = !rec.moves.is_empty()
        && rec
            .moves
            .moves()
            .iter()
            .all(|m| m.rule == Rule::Anon(AnonRule::Candidacy));
    if !candidacy_only {
        return Ok(());
    }
    let before = compute_beta(g, &rec.source);
    let after = compute_beta(g, &rec.target);
    let grew = after.len() > before.len() && first_lost(&before, &after).is_none();
    let fresh = candidate_view(g, &rec.target)
        .alive_components()
        .any(|c| c.iter().all(|&u| !rec.source.candidate(u)));
    if grew || fresh {
        Ok(())
    } else {
        Err(Violation::NewAlive { step })
    }
}

pub fn check_staying_alive(g: &Graph, rec: &TransitionRecord, step: usize) -> Result<(), Violation> {
    let next = candidate_view(g, &rec.target);
    for report in detect_vanish(g, rec) {
        if report.vanished {
            continue;
        }
        let kept = next
            .alive_components()
            .any(|c| c.iter().all(|u| report.component.binary_search(u).is_ok()));
        if !kept {
            return Err(Violation::StayingAlive {
                step,
                component: report.component,
            });
        }
    }
    Ok(())
}

/// Per-round progress obligations of the Byzantine algorithm, checked at
/// each round boundary against the configuration that opened the round.
#[derive(Debug, Clone)]
pub struct ByzProgressMonitor {
    round: usize,
    start_i: Vec<NodeId>,
    degree_stabilized: bool,
    withdrawal_due: Vec<NodeId>,
    candidacy_due: Vec<NodeId>,
    three_way_due: bool,
    three_way_met: bool,
    withdrew: Vec<bool>,
    tried_candidacy: Vec<bool>,
}

impl ByzProgressMonitor {
    pub fn new(g: &Graph, levels: &LevelSets, initial: &Configuration) -> Self {
        let mut m = ByzProgressMonitor {
            round: 0,
            start_i: Vec::new(),
            degree_stabilized: false,
            withdrawal_due: Vec::new(),
            candidacy_due: Vec::new(),
            three_way_due: false,
            three_way_met: false,
            withdrew: vec![false; g.node_count()],
            tried_candidacy: vec![false; g.node_count()],
        };
        m.open_round(g, levels, initial);
        m
    }

    fn open_round(&mut self, g: &Graph, levels: &LevelSets, cfg: &Configuration) {
        self.start_i = compute_i(g, levels, cfg);
        self.degree_stabilized = is_degree_stabilized(g, cfg);
        self.withdrew.fill(false);
        self.tried_candidacy.fill(false);
        self.withdrawal_due.clear();
        self.candidacy_due.clear();
        self.three_way_due = false;
        if !self.degree_stabilized {
            return;
        }
        for u in levels.level(1) {
            match byzantine::enabled(g, cfg, u) {
                Some(ByzRule::Withdrawal) => self.withdrawal_due.push(u),
                Some(ByzRule::CandidacyQ) => self.candidacy_due.push(u),
                _ => {}
            }
        }
        self.three_way_due = !is_legitimate_byz(g, levels, cfg);
        self.three_way_met = candidacy_enabled_in_v2(g, levels, cfg);
    }

    /// Feeds one transition; `closes_round` says whether it ended a round.
    pub fn observe(
        &mut self,
        g: &Graph,
        levels: &LevelSets,
        rec: &TransitionRecord,
        closes_round: bool,
    ) -> Vec<Violation> {
        for m in rec.moves.moves() {
            match m.rule {
                Rule::Byz(ByzRule::Withdrawal) => self.withdrew[m.node] = true,
                Rule::Byz(ByzRule::CandidacyQ) => {
                    self.tried_candidacy[m.node] = true;
                    if levels.contains(1, m.node) {
                        self.three_way_met = true;
                    }
                }
                _ => {}
            }
        }
        if !self.three_way_met && self.three_way_due {
            let i = compute_i(g, levels, &rec.target);
            self.three_way_met =
                i.len() > self.start_i.len() || candidacy_enabled_in_v2(g, levels, &rec.target);
        }
        if !closes_round {
            return Vec::new();
        }

        let mut found = Vec::new();
        let round = self.round;
        let end = &rec.target;
        if round == 0 && !is_degree_stabilized(g, end) {
            found.push(Violation::DegreeNotStabilized { round });
        }
        let end_i = compute_i(g, levels, end);
        for &node in &self.withdrawal_due {
            if !self.withdrew[node] && end_i.binary_search(&node).is_err() {
                found.push(Violation::WithdrawalProgress { round, node });
            }
        }
        for &node in &self.candidacy_due {
            let near =
                self.tried_candidacy[node] || g.neighbors(node).iter().any(|&v| self.tried_candidacy[v]);
            if !near {
                found.push(Violation::CandidacyProgress { round, node });
            }
        }
        if self.three_way_due && !self.three_way_met {
            found.push(Violation::ThreeWayProgress { round });
        }
        self.round += 1;
        self.open_round(g, levels, end);
        found
    }
}

fn candidacy_enabled_in_v2(g: &Graph, levels: &LevelSets, cfg: &Configuration) -> bool {
    levels
        .level(2)
        .into_iter()
        .any(|u| byzantine::enabled(g, cfg, u) == Some(ByzRule::CandidacyQ))
}
