use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::spec::Experiment;
use crate::analysis::{
    alive_cap_holds, check_beta_monotone, check_i_monotone, check_neighbor_exclusion, check_new_alive,
    check_staying_alive, compute_beta, compute_i, evaluate_bounds, is_legitimate_byz,
    is_maximal_independent_set, BoundError, Bounds, ByzProgressMonitor, Metrics, RoundAccounting, Violation,
};
use crate::daemon::{ByzantinePolicy, Daemon, PolicyError, Selection};
use crate::graph::Graph;
use crate::model::{
    activable_nodes, apply_transition, Algorithm, Configuration, ExecutionTrace, LocalState, ModelError,
    RandomStream,
};

const INIT_STREAM: u64 = u64::MAX - 2;
/// Violations kept verbatim per trial; the rest are only counted.
const KEPT_VIOLATIONS: usize = 16;

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("trial {index}: {source}")]
    Policy {
        index: usize,
        #[source]
        source: PolicyError,
    },
    #[error("trial {index}: {source}")]
    Model {
        index: usize,
        #[source]
        source: ModelError,
    },
    #[error("trial {index}: {source}")]
    Bounds {
        index: usize,
        #[source]
        source: BoundError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub algo: Algorithm,
    pub daemon: String,
    pub n: usize,
    pub m: usize,
    pub delta: usize,
    pub byz_count: usize,
    /// Rounds until the first legitimate (Byzantine) or stable (anonymous)
    /// configuration; a partial round counts as one. `None` on timeout.
    pub rounds_to_legit: Option<u64>,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub final_i_size: usize,
    pub final_beta_size: usize,
    pub timed_out: bool,
    /// Final configuration is legitimate (Byzantine) or stable with `β` a
    /// maximal independent set (anonymous). False on timeout.
    pub legitimate: bool,
    pub violation_count: usize,
    pub violations: Vec<String>,
    /// Violation count per property name (see `Violation::kind`).
    pub violation_kinds: BTreeMap<&'static str, usize>,
    pub round_bound: f64,
    pub move_bound: f64,
}

impl TrialResult {
    pub fn total_moves(&self) -> u64 {
        self.metrics.total_moves()
    }
}

/// Arbitrary starting point: uniform `s`, `x` uniform in `0..=2Δ+1`.
pub fn random_configuration(g: &Graph, seed: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    let hi = 2 * g.max_degree() as u32 + 1;
    Configuration::new(
        g.nodes()
            .map(|_| LocalState::new(rng.random_bool(0.5), rng.random_range(0..=hi)))
            .collect(),
    )
}

#[derive(Default)]
struct Checks {
    count: usize,
    kept: Vec<String>,
    kinds: BTreeMap<&'static str, usize>,
}

impl Checks {
    fn push(&mut self, v: Violation) {
        self.count += 1;
        *self.kinds.entry(v.kind()).or_default() += 1;
        if self.kept.len() < KEPT_VIOLATIONS {
            self.kept.push(v.to_string());
        }
    }

    fn check(&mut self, r: Result<(), Violation>) {
        if let Err(v) = r {
            self.push(v);
        }
    }
}

pub struct TrialOutcome {
    pub result: TrialResult,
    pub trace: Option<ExecutionTrace>,
}

/// One seeded execution with every runtime invariant checked per transition.
pub fn run_trial(exp: &Experiment, index: usize, record: bool) -> Result<TrialOutcome, TrialError> {
    let algo = exp.algo;
    let seed = exp.trial_seed(index);
    let g = exp.graph.graph_for(seed);
    let levels = g.level_sets();
    let n = g.node_count();
    let bounds: Bounds = evaluate_bounds(n, g.max_degree(), exp.p_bound)
        .map_err(|source| TrialError::Bounds { index, source })?;
    let max_rounds = exp.max_rounds.unwrap_or(match algo {
        Algorithm::Byzantine => (10.0 * bounds.byz_round_bound).ceil() as u64,
        Algorithm::Anonymous => u64::MAX,
    });
    let max_steps = exp.max_steps.unwrap_or(match algo {
        Algorithm::Anonymous => (10.0 * bounds.anon_move_bound).ceil() as u64,
        Algorithm::Byzantine => max_rounds.saturating_mul((n as u64 + 1).pow(2)),
    });

    let init = random_configuration(&g, seed);
    let coins = RandomStream::new(seed);
    let mut daemon = Daemon::new(exp.daemon.clone(), seed);
    let mut policy = ByzantinePolicy::new(&exp.policy, seed);
    let mut metrics = Metrics::new(algo, &g, &levels, &init);
    let mut acc = RoundAccounting::new(&activable_nodes(algo, &g, &init));
    let mut monitor = (algo == Algorithm::Byzantine).then(|| ByzProgressMonitor::new(&g, &levels, &init));
    let mut checks = Checks::default();
    let mut trace = record.then(|| ExecutionTrace::new(algo, g.clone(), init.clone()));
    if algo == Algorithm::Anonymous {
        checks.check(alive_cap_holds(&g, &init, 0));
        checks.check(check_neighbor_exclusion(&g, &init, 0));
    }

    let mut cfg = init;
    let mut rounds_to_legit: Option<u64> = None;
    let mut timed_out = false;
    let mut stable = false;
    let mut step: u64 = 0;
    loop {
        let elapsed = acc.round_index as u64 + u64::from(acc.round_in_progress());
        if algo == Algorithm::Byzantine {
            if rounds_to_legit.is_none() && is_legitimate_byz(&g, &levels, &cfg) {
                rounds_to_legit = Some(elapsed);
            }
            if let Some(r) = rounds_to_legit {
                if acc.round_index as u64 >= r + exp.closure_rounds {
                    break;
                }
            }
        }
        if acc.round_index as u64 >= max_rounds || step >= max_steps {
            timed_out = true;
            break;
        }
        let schedule = match daemon.select(algo, &g, &cfg) {
            Selection::Stable => {
                stable = true;
                if algo == Algorithm::Anonymous {
                    rounds_to_legit = Some(elapsed);
                }
                break;
            }
            Selection::Step(s) => s,
        };
        let byz = policy
            .act(&g, &cfg, step, &schedule.byzantine)
            .map_err(|source| TrialError::Policy { index, source })?;
        let rec = apply_transition(algo, &g, &cfg, &schedule.moves, &byz, &coins, step)
            .map_err(|source| TrialError::Model { index, source })?;
        metrics.record(algo, &g, &levels, &rec);
        let before = activable_nodes(algo, &g, &rec.source);
        let after = activable_nodes(algo, &g, &rec.target);
        let closes = acc.advance(&rec, &before, &after);
        let at = step as usize;
        match algo {
            Algorithm::Byzantine => {
                checks.check(check_i_monotone(&g, &levels, &rec, at));
                if let Some(m) = monitor.as_mut() {
                    for v in m.observe(&g, &levels, &rec, closes) {
                        checks.push(v);
                    }
                }
                if rounds_to_legit.is_some() && !is_legitimate_byz(&g, &levels, &rec.target) {
                    checks.push(Violation::LegitimacyLost { step: at });
                }
            }
            Algorithm::Anonymous => {
                checks.check(check_beta_monotone(&g, &rec, at));
                checks.check(alive_cap_holds(&g, &rec.target, at + 1));
                checks.check(check_neighbor_exclusion(&g, &rec.target, at + 1));
                checks.check(check_new_alive(&g, &rec, at));
                checks.check(check_staying_alive(&g, &rec, at));
            }
        }
        cfg = rec.target.clone();
        if let Some(t) = trace.as_mut() {
            t.steps.push(rec);
        }
        step += 1;
    }
    metrics.rounds = acc.round_index as u64;

    let beta = compute_beta(&g, &cfg);
    let all: Vec<usize> = g.nodes().collect();
    let legitimate = !timed_out
        && match algo {
            Algorithm::Byzantine => is_legitimate_byz(&g, &levels, &cfg),
            Algorithm::Anonymous => stable && is_maximal_independent_set(&g, &beta, &all),
        };
    if algo == Algorithm::Anonymous && stable && !legitimate {
        checks.push(Violation::StableNotMis);
    }
    if let Some(t) = trace.as_mut() {
        t.terminated = stable;
    }
    let result = TrialResult {
        index,
        seed,
        algo,
        daemon: exp.daemon.to_string(),
        n,
        m: g.edge_count(),
        delta: g.max_degree(),
        byz_count: g.byzantine_count(),
        rounds_to_legit: if timed_out { None } else { rounds_to_legit },
        metrics,
        final_i_size: compute_i(&g, &levels, &cfg).len(),
        final_beta_size: beta.len(),
        timed_out,
        legitimate,
        violation_count: checks.count,
        violations: checks.kept,
        violation_kinds: checks.kinds,
        round_bound: bounds.byz_round_bound,
        move_bound: bounds.anon_move_bound,
    };
    Ok(TrialOutcome { result, trace })
}

/// Every trial of `exp`, in parallel, ordered by trial index.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<TrialResult>, TrialError> {
    (0..exp.trials)
        .into_par_iter()
        .map(|i| run_trial(exp, i, false).map(|o| o.result))
        .collect()
}

/// Like [`run_experiment`], keeping each trial's execution trace.
pub fn run_experiment_traced(exp: &Experiment) -> Result<Vec<TrialOutcome>, TrialError> {
    (0..exp.trials)
        .into_par_iter()
        .map(|i| run_trial(exp, i, true))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::spec::ExperimentSpec;

    fn exp(json: &str) -> Experiment {
        ExperimentSpec::from_json(json).unwrap().validate().unwrap()
    }

    #[test]
    fn pair_sync_always_one_winner() {
        let e = exp(
            r#"{"algo":"anon","graph":{"kind":"complete","n":2},"daemon":"sync",
                        "trials":1000,"seed":1,"p_bound":0.1}"#,
        );
        let results = run_experiment(&e).unwrap();
        assert_eq!(results.len(), 1000);
        for r in &results {
            assert!(!r.timed_out && r.legitimate, "{r:?}");
            assert_eq!(r.final_beta_size, 1);
            assert_eq!(r.violation_count, 0, "{:?}", r.violations);
        }
    }

    #[test]
    fn byzantine_free_run_ends_in_mis() {
        let e = exp(
            r#"{"algo":"byz","graph":{"kind":"gnp","n":12,"p":0.3},"daemon":"fair:rsubset:0.5:n",
                        "trials":50,"seed":9,"p_bound":0.5}"#,
        );
        for r in run_experiment(&e).unwrap() {
            assert!(r.legitimate && !r.timed_out, "{r:?}");
            assert_eq!(r.violation_count, 0, "{:?}", r.violations);
            assert_eq!(r.final_i_size, r.final_beta_size);
        }
    }

    #[test]
    fn byzantine_node_runs_stop_after_closure() {
        let e = exp(
            r#"{"algo":"byz","graph":{"kind":"cycle","n":8,"byzantine":[0]},"daemon":"fair:single:n",
                        "byz_policy":"flip","trials":20,"seed":2,"p_bound":0.5}"#,
        );
        for r in run_experiment(&e).unwrap() {
            assert!(r.legitimate && !r.timed_out, "{r:?}");
            let legit = r.rounds_to_legit.unwrap();
            assert!(r.metrics.rounds >= legit + 5);
            assert_eq!(r.violation_count, 0, "{:?}", r.violations);
        }
    }

    #[test]
    fn deterministic_and_traced() {
        let e = exp(
            r#"{"algo":"anon","graph":{"kind":"gnp","n":10,"p":0.3},"daemon":"rsubset:0.5",
                        "trials":8,"seed":5,"p_bound":0.1}"#,
        );
        let a = run_experiment(&e).unwrap();
        let b = run_experiment(&e).unwrap();
        assert_eq!(a, b);
        let traced = run_experiment_traced(&e).unwrap();
        for (o, r) in traced.iter().zip(&a) {
            assert_eq!(&o.result, r);
            let t = o.trace.as_ref().unwrap();
            assert!(t.terminated);
            assert_eq!(t.steps.len() as u64, r.metrics.transitions);
            t.check_chain().unwrap();
        }
    }

    #[test]
    fn step_cap_times_out() {
        let e = exp(
            r#"{"algo":"anon","graph":{"kind":"complete","n":6},"daemon":"sync",
                        "trials":3,"seed":5,"p_bound":0.1,"max_steps":1}"#,
        );
        for r in run_experiment(&e).unwrap() {
            assert!(r.timed_out || r.legitimate);
            if r.timed_out {
                assert_eq!(r.rounds_to_legit, None);
                assert!(!r.legitimate);
            }
        }
    }

    #[test]
    fn random_configuration_in_range() {
        let g = crate::graph::generate(crate::graph::GraphKind::Star, 5, 0.0, 0).unwrap();
        let c = random_configuration(&g, 3);
        assert!(c.states().iter().all(|s| s.x <= 9));
        assert_eq!(c, random_configuration(&g, 3));
    }
}
