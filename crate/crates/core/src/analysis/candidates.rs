use std::collections::VecDeque;

use super::is_locally_alone;
use crate::graph::{Graph, NodeId};
use crate::model::{Configuration, TransitionRecord};

/// Connected components of the subgraph induced by `⊤` nodes. Each one is a
/// connected candidate set; it is alive iff it has at least two nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSetView {
    /// Sorted members; components ordered by smallest member.
    pub components: Vec<Vec<NodeId>>,
    pub alive: Vec<bool>,
    component_of: Vec<Option<usize>>,
}

impl CandidateSetView {
    pub fn component_of(&self, u: NodeId) -> Option<usize> {
        self.component_of[u]
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn alive_components(&self) -> impl Iterator<Item = &[NodeId]> {
        self.components
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(c, _)| c.as_slice())
    }
}

pub fn candidate_view(g: &Graph, cfg: &Configuration) -> CandidateSetView {
    let mut component_of = vec![None; g.node_count()];
    let mut components = Vec::new();
    for start in g.nodes() {
        if !cfg.candidate(start) || component_of[start].is_some() {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component_of[start] = Some(id);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if cfg.candidate(v) && component_of[v].is_none() {
                    component_of[v] = Some(id);
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    let alive = components.iter().map(|c| c.len() >= 2).collect();
    CandidateSetView {
        components,
        alive,
        component_of,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VanishReport {
    pub component: Vec<NodeId>,
    /// Every member is `⊥` or locally alone in the target.
    pub vanished: bool,
    /// Some member is locally alone in the target.
    pub beta_grew: bool,
}

/// One report per alive connected candidate set of the source.
pub fn detect_vanish(g: &Graph, record: &TransitionRecord) -> Vec<VanishReport> {
    let target = &record.target;
    candidate_view(g, &record.source)
        .alive_components()
        .map(|c| {
            let alone = |u: NodeId| is_locally_alone(g, target, u);
            VanishReport {
                component: c.to_vec(),
                vanished: c.iter().all(|&u| !target.candidate(u) || alone(u)),
                beta_grew: c.iter().any(|&u| alone(u)),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymous::AnonRule;
    use crate::graph::{generate, GraphKind};
    use crate::model::{apply_with_draws, Algorithm, Move, MoveSet, Rule};

    #[test]
    fn components() {
        let p4 = generate(GraphKind::Path, 4, 0.0, 0).unwrap();
        let v = candidate_view(&p4, &Configuration::from_flags(&p4, &[true, true, false, true]));
        assert_eq!(v.components, vec![vec![0, 1], vec![3]]);
        assert_eq!(v.alive, vec![true, false]);
        assert_eq!(v.component_of(2), None);

        let v = candidate_view(&p4, &Configuration::from_flags(&p4, &[false; 4]));
        assert!(v.components.is_empty());

        let k3 = generate(GraphKind::Complete, 3, 0.0, 0).unwrap();
        let v = candidate_view(&k3, &Configuration::from_flags(&k3, &[true; 3]));
        assert_eq!(v.components, vec![vec![0, 1, 2]]);
        assert_eq!(v.alive_count(), 1);
    }

    #[test]
    fn vanish_on_pair() {
        let k2 = generate(GraphKind::Complete, 2, 0.0, 0).unwrap();
        let source = Configuration::from_flags(&k2, &[true, true]);
        let w = Rule::Anon(AnonRule::WithdrawalQ);
        let t = MoveSet::new(vec![Move::new(0, w), Move::new(1, w)]);
        let report = |d0: bool, d1: bool| {
            let draws = vec![(0, d0), (1, d1)];
            let target = apply_with_draws(Algorithm::Anonymous, &k2, &source, &t, &draws, &[]).unwrap();
            let rec = TransitionRecord {
                source: source.clone(),
                moves: t.clone(),
                draws,
                byzantine: vec![],
                target,
            };
            let r = detect_vanish(&k2, &rec);
            assert_eq!(r.len(), 1);
            (r[0].vanished, r[0].beta_grew)
        };
        assert_eq!(report(true, true), (true, false));
        assert_eq!(report(true, false), (true, true));
        assert_eq!(report(false, false), (false, false));
    }
}
