//! Immutable undirected graphs with a designated Byzantine subset.
//!
//! Node ids are plain indices used by the simulator for bookkeeping. Rule
//! evaluation only ever sees a node's local state and its neighbours' states,
//! so the algorithms themselves stay anonymous.

mod generate;
mod levels;
mod text;

pub use generate::{generate, GraphKind};
pub use levels::{LevelSets, INFINITE_DISTANCE};
pub use text::parse_graph;

use std::collections::BTreeSet;

use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("edge ({0}, {1}) has an endpoint outside 0..{2}")]
    EndpointOutOfRange(NodeId, NodeId, usize),
    #[error("Byzantine node {0} outside 0..{1}")]
    ByzantineOutOfRange(NodeId, usize),
    #[error("edge probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("malformed graph text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<NodeId>>,
    edges: Vec<(NodeId, NodeId)>,
    byzantine: Vec<bool>,
}

impl Graph {
    /// Builds a canonical graph: duplicate edges collapse, adjacency lists are
    /// sorted and symmetric.
    pub fn new(n: usize, edge_list: &[(NodeId, NodeId)], byzantine: &[NodeId]) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut edges = BTreeSet::new();
        for &(u, v) in edge_list {
            if u >= n || v >= n {
                return Err(GraphError::EndpointOutOfRange(u, v, n));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            edges.insert((u.min(v), u.max(v)));
        }
        let mut byz = vec![false; n];
        for &b in byzantine {
            if b >= n {
                return Err(GraphError::ByzantineOutOfRange(b, n));
            }
            byz[b] = true;
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Graph {
            adjacency,
            edges: edges.into_iter().collect(),
            byzantine: byz,
        })
    }

    /// Same topology, different Byzantine set.
    pub fn with_byzantine(&self, byzantine: &[NodeId]) -> Result<Self, GraphError> {
        Graph::new(self.node_count(), &self.edges, byzantine)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn is_byzantine(&self, u: NodeId) -> bool {
        self.byzantine[u]
    }

    pub fn byzantine_nodes(&self) -> Vec<NodeId> {
        self.nodes().filter(|&u| self.byzantine[u]).collect()
    }

    pub fn byzantine_count(&self) -> usize {
        self.byzantine.iter().filter(|&&b| b).count()
    }

    pub fn nodes(&self) -> std::ops::Range<NodeId> {
        0..self.node_count()
    }

    pub fn honest_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(move |&u| !self.byzantine[u])
    }

    pub fn level_sets(&self) -> LevelSets {
        LevelSets::compute(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_edge() {
        let g = Graph::new(2, &[(0, 1)], &[]).unwrap();
        assert_eq!(g.max_degree(), 1);
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(1, 0));
    }

    #[test]
    fn path_degrees() {
        let g = Graph::new(3, &[(0, 1), (1, 2)], &[]).unwrap();
        let deg: Vec<_> = g.nodes().map(|u| g.degree(u)).collect();
        assert_eq!(deg, vec![1, 2, 1]);
        assert_eq!(g.max_degree(), 2);
    }

    #[test]
    fn rejects_self_loop() {
        assert_eq!(
            Graph::new(3, &[(0, 1), (1, 1)], &[]),
            Err(GraphError::SelfLoop(1))
        );
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(matches!(
            Graph::new(3, &[(0, 3)], &[]),
            Err(GraphError::EndpointOutOfRange(0, 3, 3))
        ));
        assert_eq!(
            Graph::new(3, &[(0, 1)], &[5]),
            Err(GraphError::ByzantineOutOfRange(5, 3))
        );
        assert_eq!(Graph::new(0, &[], &[]), Err(GraphError::Empty));
    }

    #[test]
    fn duplicates_collapse() {
        let g = Graph::new(3, &[(0, 1), (1, 0), (0, 1)], &[2]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.byzantine_nodes(), vec![2]);
        assert_eq!(g.honest_nodes().collect::<Vec<_>>(), vec![0, 1]);
    }
}
