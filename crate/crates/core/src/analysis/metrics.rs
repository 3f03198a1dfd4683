use serde::Serialize;

use super::{compute_beta, compute_i, detect_vanish};
use crate::anonymous::AnonRule;
use crate::byzantine::ByzRule;
use crate::graph::{Graph, LevelSets};
use crate::model::{Algorithm, Configuration, Rule, TransitionRecord};

/// Counters over one execution. Candidacy counts both `Candidacy?` and
/// `Candidacy`; withdrawal counts both `Withdrawal` and `Withdrawal?`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Metrics {
    pub transitions: u64,
    pub rounds: u64,
    pub moves_refresh: u64,
    pub moves_candidacy: u64,
    pub moves_withdrawal: u64,
    /// Withdrawal moves that actually turned the node to `⊥`.
    pub successful_withdrawals: u64,
    pub vanish_events: u64,
    /// `(transitions, size)` each time the output set (`I` or `β`) changes
    /// size, starting with the initial configuration.
    pub output_sizes: Vec<(u64, usize)>,
}

impl Metrics {
    pub fn new(algo: Algorithm, g: &Graph, levels: &LevelSets, initial: &Configuration) -> Self {
        Metrics {
            output_sizes: vec![(0, output_size(algo, g, levels, initial))],
            ..Metrics::default()
        }
    }

    pub fn total_moves(&self) -> u64 {
        self.moves_refresh + self.moves_candidacy + self.moves_withdrawal
    }

    pub fn final_output_size(&self) -> usize {
        self.output_sizes.last().map_or(0, |&(_, s)| s)
    }

    pub fn record(&mut self, algo: Algorithm, g: &Graph, levels: &LevelSets, rec: &TransitionRecord) {
        self.transitions += 1;
        for m in rec.moves.moves() {
            match m.rule {
                Rule::Byz(ByzRule::Refresh) => self.moves_refresh += 1,
                Rule::Byz(ByzRule::CandidacyQ) | Rule::Anon(AnonRule::Candidacy) => self.moves_candidacy += 1,
                Rule::Byz(ByzRule::Withdrawal) | Rule::Anon(AnonRule::WithdrawalQ) => {
                    self.moves_withdrawal += 1;
                    if !rec.target.candidate(m.node) {
                        self.successful_withdrawals += 1;
                    }
                }
            }
        }
        if algo == Algorithm::Anonymous {
            self.vanish_events += detect_vanish(g, rec).iter().filter(|r| r.vanished).count() as u64;
        }
        let size = output_size(algo, g, levels, &rec.target);
        if size != self.final_output_size() {
            self.output_sizes.push((self.transitions, size));
        }
    }
}

fn output_size(algo: Algorithm, g: &Graph, levels: &LevelSets, cfg: &Configuration) -> usize {
    match algo {
        Algorithm::Byzantine => compute_i(g, levels, cfg).len(),
        Algorithm::Anonymous => compute_beta(g, cfg).len(),
    }
}
