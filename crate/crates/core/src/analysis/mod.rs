//! Executable versions of the structures the correctness arguments rely on:
//! output sets, legitimacy, rounds, candidate sets, trace normalization,
//! closed-form bounds and per-transition invariants.

mod bounds;
mod candidates;
mod invariants;
mod metrics;
mod normalize;
mod rounds;

pub use bounds::{evaluate_bounds, BoundError, Bounds};
pub use candidates::{candidate_view, detect_vanish, CandidateSetView, VanishReport};
pub use invariants::{
    alive_cap_holds, check_beta_monotone, check_i_monotone, check_neighbor_exclusion, check_new_alive,
    check_staying_alive, ByzProgressMonitor, Violation,
};
pub use metrics::Metrics;
pub use normalize::{normalize_trace, split_move_set, NormalizeError};
pub use rounds::{advance_rounds, disabling_actions, RoundAccounting, Satisfaction};

use crate::graph::{Graph, LevelSets, NodeId};
use crate::model::{enabled_rule, Algorithm, Configuration};

/// `s_u = ⊤` and every neighbour is `⊥`.
pub fn is_locally_alone(g: &Graph, cfg: &Configuration, u: NodeId) -> bool {
    cfg.candidate(u) && g.neighbors(u).iter().all(|&v| !cfg.candidate(v))
}

/// Locally alone nodes of `V_1`, sorted.
pub fn compute_i(g: &Graph, levels: &LevelSets, cfg: &Configuration) -> Vec<NodeId> {
    g.nodes()
        .filter(|&u| levels.contains(1, u) && is_locally_alone(g, cfg, u))
        .collect()
}

/// Locally alone nodes of `V`, sorted.
pub fn compute_beta(g: &Graph, cfg: &Configuration) -> Vec<NodeId> {
    g.nodes().filter(|&u| is_locally_alone(g, cfg, u)).collect()
}

/// `I_γ` is a maximal independent set of `V_2 ∪ I_γ`.
pub fn is_legitimate_byz(g: &Graph, levels: &LevelSets, cfg: &Configuration) -> bool {
    let i = compute_i(g, levels, cfg);
    let mut domain: Vec<NodeId> = levels.level(2);
    domain.extend_from_slice(&i);
    domain.sort_unstable();
    domain.dedup();
    is_maximal_independent_set(g, &i, &domain)
}

/// No honest node has an enabled rule.
pub fn is_stable(algo: Algorithm, g: &Graph, cfg: &Configuration) -> bool {
    g.honest_nodes().all(|u| enabled_rule(algo, g, cfg, u).is_none())
}

/// Every honest `x_u` equals `deg(u)`.
pub fn is_degree_stabilized(g: &Graph, cfg: &Configuration) -> bool {
    g.honest_nodes().all(|u| cfg.x(u) as usize == g.degree(u))
}

/// Pairwise non-adjacent in `g`.
pub fn is_independent(g: &Graph, set: &[NodeId]) -> bool {
    set.iter()
        .enumerate()
        .all(|(i, &u)| set[i + 1..].iter().all(|&v| u != v && !g.has_edge(u, v)))
}

/// `set ⊆ domain`, independent, and every node of `domain` is in `set` or
/// adjacent to a node of `set`.
pub fn is_maximal_independent_set(g: &Graph, set: &[NodeId], domain: &[NodeId]) -> bool {
    let mut member = vec![false; g.node_count()];
    for &u in set {
        member[u] = true;
    }
    set.iter().all(|u| domain.contains(u))
        && is_independent(g, set)
        && domain
            .iter()
            .all(|&u| member[u] || g.neighbors(u).iter().any(|&v| member[v]))
}
