//! Exact analysis of tiny instances over rationals: enumerated Markov chains,
//! absorption, min-over-daemon probabilities and the probability bounds the
//! convergence arguments rely on.

mod chain;
mod lemmas;
mod mdp;
pub mod rational;
mod verify;

pub use chain::{
    absorption, absorption_distribution, build_chain, build_chain_with_cap, expected_cost,
    move_probability_exact, outcome_distribution, Absorption, ChainDaemon, Choice, ExactChain,
    DEFAULT_STATE_CAP,
};
pub use lemmas::{
    all_graphs, all_subsets, candidacy_success_min, check_candidacy_success, check_two_round_growth,
    conditional_vanish_payoff, degree_stabilized_configurations, fact_power_exact, fact_power_float,
    LemmaCheck,
};
pub use mdp::{byzantine_menu, min_daemon_probability, min_daemon_probability_with_cap};
pub use rational::Q;
pub use verify::{catalog, verify_catalog, CheckResult, VerifyReport};

pub const DEFAULT_MDP_CAP: usize = 1 << 18;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("state space exceeds the cap of {cap} ({explored} states explored)")]
    CapExceeded { cap: usize, explored: usize },
    #[error("the all-choices daemon has no transition probabilities")]
    AllDaemon,
    #[error("target unreachable from the start state")]
    Unreachable,
    #[error("daemon `{0}` cannot be enumerated exactly")]
    UnsupportedDaemon(String),
    #[error("not an alive connected candidate set")]
    NotAlive,
    #[error("configuration has {found} nodes, graph has {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("{0} nodes is too many for exact analysis")]
    TooLarge(usize),
}
