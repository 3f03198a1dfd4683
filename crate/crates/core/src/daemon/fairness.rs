use crate::graph::NodeId;
use crate::model::{is_activable, ExecutionTrace};

/// Per-node count of consecutive configurations in which the node was
/// activable and has not been activated since.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FairnessLedger {
    ages: Vec<usize>,
}

impl FairnessLedger {
    pub fn new(n: usize) -> Self {
        FairnessLedger { ages: vec![0; n] }
    }

    pub fn age(&self, u: NodeId) -> usize {
        self.ages[u]
    }

    /// Called once per configuration, before the daemon chooses.
    pub fn observe(&mut self, activable: &[bool]) {
        if self.ages.len() != activable.len() {
            self.ages = vec![0; activable.len()];
        }
        for (age, &a) in self.ages.iter_mut().zip(activable) {
            *age = if a { *age + 1 } else { 0 };
        }
    }

    pub fn activated(&mut self, nodes: impl IntoIterator<Item = NodeId>) {
        for u in nodes {
            self.ages[u] = 0;
        }
    }

    pub fn overdue(&self, age_bound: usize) -> impl Iterator<Item = NodeId> + '_ {
        self.ages
            .iter()
            .enumerate()
            .filter(move |&(_, &a)| a >= age_bound)
            .map(|(u, _)| u)
    }
}

/// False iff some node was activable yet skipped in more than `age_bound`
/// consecutive transitions. Byzantine nodes count as always activable.
pub fn fairness_audit(trace: &ExecutionTrace, age_bound: usize) -> bool {
    let g = &trace.graph;
    let mut skipped = vec![0usize; g.node_count()];
    for rec in &trace.steps {
        let mut active = vec![false; g.node_count()];
        for u in rec.activated() {
            active[u] = true;
        }
        for u in g.nodes() {
            if !active[u] && is_activable(trace.algorithm, g, &rec.source, u) {
                skipped[u] += 1;
                if skipped[u] > age_bound {
                    return false;
                }
            } else {
                skipped[u] = 0;
            }
        }
    }
    true
}
