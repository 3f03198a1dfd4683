use std::collections::VecDeque;

use super::{Graph, NodeId};

/// Distance reported for every node when the Byzantine set is empty.
pub const INFINITE_DISTANCE: usize = usize::MAX;

/// Distances to the Byzantine set and the nested sets `V_i = {u : d(u, B) > i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSets {
    distance: Vec<usize>,
}

impl LevelSets {
    /// Multi-source BFS from every Byzantine node.
    pub fn compute(g: &Graph) -> Self {
        let mut distance = vec![INFINITE_DISTANCE; g.node_count()];
        let mut queue = VecDeque::new();
        for b in g.byzantine_nodes() {
            distance[b] = 0;
            queue.push_back(b);
        }
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if distance[v] == INFINITE_DISTANCE {
                    distance[v] = distance[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        LevelSets { distance }
    }

    pub fn distance(&self, u: NodeId) -> usize {
        self.distance[u]
    }

    /// Whether `u ∈ V_i`.
    pub fn contains(&self, i: usize, u: NodeId) -> bool {
        self.distance[u] > i
    }

    pub fn level(&self, i: usize) -> Vec<NodeId> {
        (0..self.distance.len())
            .filter(|&u| self.contains(i, u))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GraphKind};
    use proptest::prelude::*;

    #[test]
    fn path_from_one_end() {
        let g = generate(GraphKind::Path, 5, 0.0, 0)
            .unwrap()
            .with_byzantine(&[0])
            .unwrap();
        let lv = g.level_sets();
        let d: Vec<_> = (0..5).map(|u| lv.distance(u)).collect();
        assert_eq!(d, vec![0, 1, 2, 3, 4]);
        assert_eq!(lv.level(0), vec![1, 2, 3, 4]);
        assert_eq!(lv.level(1), vec![2, 3, 4]);
        assert_eq!(lv.level(2), vec![3, 4]);
    }

    #[test]
    fn no_byzantine_means_everything() {
        let g = generate(GraphKind::Gnp, 12, 0.3, 4).unwrap();
        let lv = g.level_sets();
        assert_eq!(lv.level(2), (0..12).collect::<Vec<_>>());
        assert_eq!(lv.distance(3), INFINITE_DISTANCE);
    }

    #[test]
    fn triangle_all_adjacent() {
        let g = generate(GraphKind::Complete, 3, 0.0, 0)
            .unwrap()
            .with_byzantine(&[0])
            .unwrap();
        let lv = g.level_sets();
        assert!(lv.level(1).is_empty());
        assert!(lv.level(2).is_empty());
    }

    proptest! {
        // V_{i+1} = { u in V_i : N(u) ⊆ V_i }, checked against BFS levels.
        #[test]
        fn levels_match_recursive_definition(
            n in 1usize..14,
            p in 0.0f64..0.6,
            seed in any::<u64>(),
            byz in proptest::collection::vec(0usize..14, 0..3),
        ) {
            let byz: Vec<_> = byz.into_iter().filter(|&b| b < n).collect();
            let g = generate(GraphKind::Gnp, n, p, seed).unwrap().with_byzantine(&byz).unwrap();
            let lv = g.level_sets();
            let mut level: Vec<bool> = g.nodes().map(|u| !g.is_byzantine(u)).collect();
            for i in 0..n + 2 {
                for u in g.nodes() {
                    prop_assert_eq!(lv.contains(i, u), level[u]);
                }
                level = g
                    .nodes()
                    .map(|u| level[u] && g.neighbors(u).iter().all(|&v| level[v]))
                    .collect();
            }
        }
    }
}
