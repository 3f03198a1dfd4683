//! Simulation and exact verification of two randomized self-stabilizing
//! maximal independent set algorithms: one tolerating Byzantine nodes under
//! a fair daemon, one for anonymous networks under an adversarial daemon.

pub mod analysis;
pub mod anonymous;
pub mod byzantine;
pub mod daemon;
pub mod graph;
pub mod harness;
pub mod model;
pub mod oracle;

pub use daemon::{ByzantinePolicy, Daemon, DaemonStrategy, FairnessLedger, PolicySpec, Schedule, Selection};
pub use graph::{generate, Graph, GraphError, GraphKind, LevelSets, NodeId};
pub use model::{
    Algorithm, ByzantineUpdate, Configuration, ExecutionTrace, LocalState, Move, MoveSet, RandomStream, Rule,
    TransitionRecord, X_MAX,
};
