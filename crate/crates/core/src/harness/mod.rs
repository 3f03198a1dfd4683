//! Experiment orchestration: validated specs, seeded parallel trials with
//! per-transition invariant checks, statistics and CSV output.

mod output;
mod run;
mod spec;
mod stats;

pub use output::{csv_string, write_csv};
pub use run::{
    random_configuration, run_experiment, run_experiment_traced, run_trial, TrialError, TrialOutcome,
    TrialResult,
};
pub use spec::{Experiment, ExperimentSpec, GraphSource, GraphSpec, SpecError, DEFAULT_CLOSURE_ROUNDS};
pub use stats::{
    chi_square_test, fit_exponent, quantiles, summarize, BoundCheck, ChiSquare, Quantiles, StatsError,
    Summary,
};
