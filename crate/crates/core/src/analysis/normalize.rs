use thiserror::Error;

use super::candidate_view;
use crate::anonymous::AnonRule;
use crate::graph::Graph;
use crate::model::{
    apply_with_draws, Algorithm, Configuration, ExecutionTrace, ModelError, MoveSet, Rule, TraceError,
    TransitionRecord,
};

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("only anonymous-algorithm traces can be normalized")]
    Algorithm,
    #[error("step {step} activates Byzantine nodes")]
    Byzantine { step: usize },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("step {step}: {source}")]
    Model { step: usize, source: ModelError },
    #[error("step {step}: split transitions end in a different configuration")]
    Mismatch { step: usize },
}

/// Splits an anonymous-algorithm move set: all Candidacy moves first, then
/// one Withdrawal? set per connected candidate set of `cfg`, ordered by the
/// set's smallest node. Applying the parts in sequence with the same coins
/// gives the same target as applying `t` at once.
pub fn split_move_set(g: &Graph, cfg: &Configuration, t: &MoveSet) -> Vec<MoveSet> {
    let mut parts = Vec::new();
    let candidacies = t.filter(|m| m.rule == Rule::Anon(AnonRule::Candidacy));
    if !candidacies.is_empty() {
        parts.push(candidacies);
    }
    let withdrawals = t.filter(|m| m.rule == Rule::Anon(AnonRule::WithdrawalQ));
    if withdrawals.is_empty() {
        return parts;
    }
    let view = candidate_view(g, cfg);
    for comp in 0..view.components.len() {
        let part = withdrawals.filter(|m| view.component_of(m.node) == Some(comp));
        if !part.is_empty() {
            parts.push(part);
        }
    }
    parts
}

/// Rewrites every transition into its split form, reusing the recorded
/// coins. Move multiset and final configuration are unchanged.
pub fn normalize_trace(trace: &ExecutionTrace) -> Result<ExecutionTrace, NormalizeError> {
    if trace.algorithm != Algorithm::Anonymous {
        return Err(NormalizeError::Algorithm);
    }
    trace.check_chain()?;
    let g = &trace.graph;
    let mut out = ExecutionTrace::new(trace.algorithm, g.clone(), trace.initial.clone());
    out.terminated = trace.terminated;
    for (step, rec) in trace.steps.iter().enumerate() {
        if !rec.byzantine.is_empty() {
            return Err(NormalizeError::Byzantine { step });
        }
        let mut cfg = rec.source.clone();
        for part in split_move_set(g, &rec.source, &rec.moves) {
            let draws: Vec<_> = rec
                .draws
                .iter()
                .copied()
                .filter(|&(u, _)| part.contains_node(u))
                .collect();
            let target = apply_with_draws(trace.algorithm, g, &cfg, &part, &draws, &[])
                .map_err(|source| NormalizeError::Model { step, source })?;
            out.steps.push(TransitionRecord {
                source: cfg,
                moves: part,
                draws,
                byzantine: vec![],
                target: target.clone(),
            });
            cfg = target;
        }
        if cfg != rec.target {
            return Err(NormalizeError::Mismatch { step });
        }
    }
    Ok(out)
}
