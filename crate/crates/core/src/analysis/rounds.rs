use crate::graph::NodeId;
use crate::model::TransitionRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Satisfaction {
    Activated,
    ObservedNonActivable,
}

/// Round bookkeeping. A round closes after the first transition at which
/// every node has been activated, or seen non-activable in some configuration
/// of the round. The closing configuration also opens the next round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundAccounting {
    /// Completed rounds.
    pub round_index: usize,
    satisfied: Vec<Option<Satisfaction>>,
    /// Transitions in the current round.
    transitions: usize,
}

impl RoundAccounting {
    /// `activable` describes the initial configuration.
    pub fn new(activable: &[bool]) -> Self {
        let mut acc = RoundAccounting {
            round_index: 0,
            satisfied: vec![None; activable.len()],
            transitions: 0,
        };
        acc.observe(activable);
        acc
    }

    pub fn satisfaction(&self, u: NodeId) -> Option<Satisfaction> {
        self.satisfied[u]
    }

    pub fn all_satisfied(&self) -> bool {
        self.satisfied.iter().all(Option::is_some)
    }

    /// Some transition belongs to the current, unfinished round.
    pub fn round_in_progress(&self) -> bool {
        self.transitions > 0
    }

    fn observe(&mut self, activable: &[bool]) {
        for (flag, &a) in self.satisfied.iter_mut().zip(activable) {
            if !a && flag.is_none() {
                *flag = Some(Satisfaction::ObservedNonActivable);
            }
        }
    }

    /// Accounts for one transition; returns true if it closed a round.
    pub fn advance(
        &mut self,
        record: &TransitionRecord,
        activable_before: &[bool],
        activable_after: &[bool],
    ) -> bool {
        self.transitions += 1;
        for u in record.activated() {
            self.satisfied[u] = Some(Satisfaction::Activated);
        }
        self.observe(activable_before);
        self.observe(activable_after);
        if !self.all_satisfied() {
            return false;
        }
        self.round_index += 1;
        self.transitions = 0;
        self.satisfied.fill(None);
        self.observe(activable_after);
        true
    }
}

pub fn advance_rounds(
    mut acc: RoundAccounting,
    record: &TransitionRecord,
    activable_before: &[bool],
    activable_after: &[bool],
) -> RoundAccounting {
    acc.advance(record, activable_before, activable_after);
    acc
}

/// Nodes activable before, idle during, and non-activable after the transition.
pub fn disabling_actions(
    record: &TransitionRecord,
    activable_before: &[bool],
    activable_after: &[bool],
) -> Vec<NodeId> {
    let mut active = vec![false; activable_before.len()];
    for u in record.activated() {
        active[u] = true;
    }
    (0..activable_before.len())
        .filter(|&u| activable_before[u] && !active[u] && !activable_after[u])
        .collect()
}
