use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bt::{Context, Executor, Node, Status, TraceSink, TreeDef};
use crate::labsim::{LabHandler, SimSetup, Task, VoteRecord, World};

use super::stats::{mean_std, wilson_interval};
use super::{HarnessError, Prepared};

/// Upper bound on ticks per trial. The shipped worlds finish every action
/// synchronously, so trials complete in a single tick.
pub const MAX_TICKS: u64 = 10_000;

/// Joint classification of the tree's verdict against the world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    TrueSuccess,
    /// The tree reported success but the task was not accomplished.
    FalseSuccess,
    DetectedFailure,
    /// The tree reported failure although the task was accomplished.
    FalseFailure,
}

impl OutcomeClass {
    pub const ALL: [OutcomeClass; 4] = [
        OutcomeClass::TrueSuccess,
        OutcomeClass::FalseSuccess,
        OutcomeClass::DetectedFailure,
        OutcomeClass::FalseFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeClass::TrueSuccess => "true_success",
            OutcomeClass::FalseSuccess => "false_success",
            OutcomeClass::DetectedFailure => "detected_failure",
            OutcomeClass::FalseFailure => "false_failure",
        }
    }
}

pub fn classify_outcome(bt_success: bool, world_success: bool) -> OutcomeClass {
    match (bt_success, world_success) {
        (true, true) => OutcomeClass::TrueSuccess,
        (true, false) => OutcomeClass::FalseSuccess,
        (false, false) => OutcomeClass::DetectedFailure,
        (false, true) => OutcomeClass::FalseFailure,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: u64,
    pub bt_success: bool,
    pub world_success: bool,
    pub outcome: OutcomeClass,
    pub duration_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fasten_iterations: Option<u32>,
    /// `max_iterations`, or the name of the last condition that voted failure.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip)]
    pub votes: Vec<VoteRecord>,
}

fn failure_reason(world: &World, setup: &SimSetup, votes: &[VoteRecord]) -> String {
    if let (World::Capping(w), Some(n)) = (world, world.fasten_iterations()) {
        if n >= setup.capping.max_iterations && w.fasten_iter > 0 {
            return "max_iterations".into();
        }
    }
    votes
        .iter()
        .rev()
        .find(|v| !v.verdict)
        .map_or_else(|| "tree_failure".into(), |v| v.condition.clone())
}

fn execute(
    template: &Executor,
    setup: &SimSetup,
    mut handler: LabHandler<'_>,
    trial: u64,
    sink: Option<&mut dyn TraceSink>,
) -> Result<(TrialReport, World), HarnessError> {
    let mut exec = template.clone();
    let mut ctx = Context::new();
    let status = exec
        .run_to_completion(&mut ctx, &mut handler, sink, MAX_TICKS)
        .map_err(|source| HarnessError::Trial { trial, source })?;
    let bt_success = status == Status::Success;
    let world_success = handler.world.task_succeeded();
    let failure = (!bt_success).then(|| failure_reason(&handler.world, setup, &handler.votes));
    let report = TrialReport {
        trial,
        bt_success,
        world_success,
        outcome: classify_outcome(bt_success, world_success),
        duration_s: ctx.clock.now(),
        fasten_iterations: handler.world.fasten_iterations(),
        failure,
        votes: std::mem::take(&mut handler.votes),
    };
    Ok((report, handler.world))
}

/// Runs trial `trial` of the prepared experiment with the given seed.
pub fn run_trial(
    prepared: &Prepared,
    seed: u64,
    trial: u64,
    sink: Option<&mut dyn TraceSink>,
) -> Result<TrialReport, HarnessError> {
    let handler = LabHandler::new(&prepared.setup, seed, trial)?;
    execute(&prepared.executor, &prepared.setup, handler, trial, sink).map(|(r, _)| r)
}

/// Maps `f` over `0..n`, in parallel when enabled, preserving order.
/// `workers == 0` uses every available core.
fn map_trials<T: Send>(
    n: u64,
    workers: usize,
    f: impl Fn(u64) -> Result<T, HarnessError> + Sync + Send,
) -> Result<Vec<T>, HarnessError> {
    #[cfg(feature = "parallel")]
    if workers != 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
        return pool.install(|| (0..n).into_par_iter().map(&f).collect());
    }
    let _ = workers;
    (0..n).map(f).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub task: Task,
    pub config_digest: String,
    pub seed: u64,
    pub trials: u64,
    /// Fraction of trials classified `true_success`.
    pub success_rate: f64,
    pub wilson_95: [f64; 2],
    pub mean_duration_s: f64,
    pub std_duration_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_fasten_iterations: Option<f64>,
    pub outcome_histogram: BTreeMap<String, u64>,
    pub failure_reasons: BTreeMap<String, u64>,
    /// Fraction of fused votes that matched ground truth, per condition.
    pub per_condition_fused_empirical_accuracy: BTreeMap<String, f64>,
}

impl RunSummary {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("summary serializes")
    }
}

pub fn condition_accuracy<'a>(
    votes: impl Iterator<Item = &'a VoteRecord>,
) -> BTreeMap<String, f64> {
    let mut tally: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for v in votes {
        let e = tally.entry(v.condition.clone()).or_default();
        e.0 += u64::from(v.verdict == v.truth);
        e.1 += 1;
    }
    tally
        .into_iter()
        .map(|(k, (hit, n))| (k, hit as f64 / n as f64))
        .collect()
}

fn histogram(reports: &[TrialReport]) -> BTreeMap<String, u64> {
    let mut h: BTreeMap<String, u64> = OutcomeClass::ALL
        .iter()
        .map(|c| (c.as_str().to_string(), 0))
        .collect();
    for r in reports {
        *h.get_mut(r.outcome.as_str()).expect("all classes present") += 1;
    }
    h
}

pub fn summarize(prepared: &Prepared, seed: u64, reports: &[TrialReport]) -> RunSummary {
    let n = reports.len() as u64;
    let successes = reports
        .iter()
        .filter(|r| r.outcome == OutcomeClass::TrueSuccess)
        .count() as u64;
    let (lo, hi) = wilson_interval(successes, n);
    let durations: Vec<f64> = reports.iter().map(|r| r.duration_s).collect();
    let (mean, std) = mean_std(&durations);
    let iterations: Vec<f64> = reports
        .iter()
        .filter_map(|r| r.fasten_iterations)
        .filter(|&i| i > 0)
        .map(f64::from)
        .collect();
    let mut failure_reasons = BTreeMap::new();
    for r in reports {
        if let Some(f) = &r.failure {
            *failure_reasons.entry(f.clone()).or_insert(0) += 1;
        }
    }
    RunSummary {
        task: prepared.setup.task,
        config_digest: prepared.digest.clone(),
        seed,
        trials: n,
        success_rate: if n == 0 {
            0.0
        } else {
            successes as f64 / n as f64
        },
        wilson_95: [lo, hi],
        mean_duration_s: mean,
        std_duration_s: std,
        mean_fasten_iterations: (prepared.setup.task == Task::Capping && !iterations.is_empty())
            .then(|| mean_std(&iterations).0),
        outcome_histogram: histogram(reports),
        failure_reasons,
        per_condition_fused_empirical_accuracy: condition_accuracy(
            reports.iter().flat_map(|r| r.votes.iter()),
        ),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trials: Vec<TrialReport>,
}

/// Runs `prepared.trials` seeded trials. Results do not depend on `workers`.
pub fn run_trials(prepared: &Prepared, workers: usize) -> Result<RunOutput, HarnessError> {
    let seed = prepared.seed;
    let trials = map_trials(prepared.trials, workers, |t| {
        run_trial(prepared, seed, t, None)
    })?;
    Ok(RunOutput {
        summary: summarize(prepared, seed, &trials),
        trials,
    })
}

/// One skill evaluated in isolation under the alternating proper/improper
/// protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSummary {
    pub skill: String,
    pub trials: u64,
    /// Fraction of trials whose final verdict matched the world.
    pub verdict_accuracy: f64,
    pub mean_duration_s: f64,
    pub outcome_histogram: BTreeMap<String, u64>,
    pub per_condition_fused_empirical_accuracy: BTreeMap<String, f64>,
}

pub fn evaluate_skill(
    prepared: &Prepared,
    skill: &str,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SkillSummary, HarnessError> {
    if !prepared.tree.skills.contains_key(skill) {
        return Err(HarnessError::Config(format!("unknown skill `{skill}`")));
    }
    let mut tree = TreeDef::new(format!("{skill}_only"), Node::use_skill(skill));
    tree.skills = prepared.tree.skills.clone();
    let executor = Executor::new(&tree).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut setup = prepared.setup.clone();
    setup.faults.enabled = true;
    setup.faults.alternate_classes = true;

    let reports = map_trials(trials, workers, |t| {
        let handler = LabHandler::for_skill(&setup, seed, t, skill)?;
        let (mut report, _) = execute(&executor, &setup, handler, t, None)?;
        // The skill's own goal is whatever its last fused check was judging.
        if let Some(last) = report.votes.last() {
            report.world_success = last.truth;
            report.outcome = classify_outcome(report.bt_success, last.truth);
        }
        Ok(report)
    })?;
    let n = reports.len().max(1) as f64;
    let correct = reports
        .iter()
        .filter(|r| r.bt_success == r.world_success)
        .count() as f64;
    let durations: Vec<f64> = reports.iter().map(|r| r.duration_s).collect();
    Ok(SkillSummary {
        skill: skill.to_string(),
        trials,
        verdict_accuracy: correct / n,
        mean_duration_s: mean_std(&durations).0,
        outcome_histogram: histogram(&reports),
        per_condition_fused_empirical_accuracy: condition_accuracy(
            reports.iter().flat_map(|r| r.votes.iter()),
        ),
    })
}
