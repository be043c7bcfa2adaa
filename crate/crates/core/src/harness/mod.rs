//! Monte Carlo experiments over the simulated tasks: configuration, trial
//! execution, outcome classification, summaries and traces.

use crate::bt::BtError;
use crate::dsl::Diagnostic;
use crate::fusion::FusionError;
use crate::labsim::SimError;

mod config;
mod oracle;
mod run;
mod stats;
mod trace;

pub use config::{
    prepare, shipped_tree, AccuracyConfig, Distributions, FaultsConfig, FusionConfig, Prepared,
    RunConfig, Tolerances, WorldConfig, CAPPING_CONFIG, CAPPING_TREE, DEFAULT_SEED, DEFAULT_TRIALS,
    INSERTION_CONFIG, INSERTION_TREE,
};
pub use oracle::{oracle, OracleReport};
pub use run::{
    classify_outcome, evaluate_skill, run_trial, run_trials, summarize, OutcomeClass, RunOutput,
    RunSummary, SkillSummary, TrialReport, MAX_TICKS,
};
pub use stats::{mean_std, wilson_interval, WILSON_Z};
pub use trace::{trace_lines, write_trace};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("tree has {} error(s): {}", .0.iter().filter(|d| d.is_error()).count(), first_error(.0))]
    Dsl(Vec<Diagnostic>),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: u64,
        #[source]
        source: BtError,
    },
}

fn first_error(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .find(|d| d.is_error())
        .map_or_else(String::new, ToString::to_string)
}
