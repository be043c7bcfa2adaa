use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bt::{ActionSpec, BtError, ConditionSpec, Context, Handler, Status};
use crate::fusion::{vote, FusionPolicy, ModalityPrediction, VoteRule};

use super::capping::{self, CappingParams, CappingWorld};
use super::insertion::{self, InsertionParams, InsertionWorld};
use super::{
    synth_ft_trace, ActionCatalog, FaultInjection, FtSynthParams, SensorSurrogate, SimError, Task,
};

/// Fusion policy of one condition and the surrogates feeding it, in policy order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSensors {
    pub policy: FusionPolicy,
    pub surrogates: Vec<SensorSurrogate>,
}

impl ConditionSensors {
    pub fn new(policy: FusionPolicy, surrogates: Vec<SensorSurrogate>) -> Result<Self, SimError> {
        let names: Vec<&str> = surrogates.iter().map(|s| s.modality()).collect();
        if names
            != policy
                .modalities()
                .iter()
                .map(String::as_str)
                .collect::<Vec<_>>()
        {
            return Err(SimError::Param(format!(
                "surrogates [{}] do not match policy modalities [{}]",
                names.join(","),
                policy.modalities().join(",")
            )));
        }
        Ok(Self { policy, surrogates })
    }
}

/// Everything a trial needs besides the tree itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetup {
    pub task: Task,
    pub catalog: ActionCatalog,
    pub faults: FaultInjection,
    pub capping: CappingParams,
    pub insertion: InsertionParams,
    pub sensors: BTreeMap<String, ConditionSensors>,
    pub rule: VoteRule,
    pub ft: FtSynthParams,
    /// Put synthetic F/T traces on the blackboard when recording actions run.
    pub synthesize_traces: bool,
}

impl SimSetup {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            catalog: ActionCatalog::new(),
            faults: FaultInjection::default(),
            capping: CappingParams::default(),
            insertion: InsertionParams::default(),
            sensors: BTreeMap::new(),
            rule: VoteRule::WeightedSum,
            ft: FtSynthParams::default(),
            synthesize_traces: false,
        }
    }

    pub fn actions(&self) -> &'static [&'static str] {
        match self.task {
            Task::Capping => capping::ACTIONS,
            Task::Insertion => insertion::ACTIONS,
        }
    }

    pub fn fused_conditions(&self) -> &'static [&'static str] {
        match self.task {
            Task::Capping => capping::FUSED_CONDITIONS,
            Task::Insertion => insertion::FUSED_CONDITIONS,
        }
    }

    pub fn deterministic_conditions(&self) -> &'static [&'static str] {
        match self.task {
            Task::Capping => capping::DETERMINISTIC_CONDITIONS,
            Task::Insertion => insertion::DETERMINISTIC_CONDITIONS,
        }
    }
}

/// Predictions for `condition` given the world's ground truth. Draws one
/// uniform per modality, in policy order.
pub fn sense(
    setup: &SimSetup,
    condition: &str,
    truth: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ModalityPrediction>, SimError> {
    let sensors = setup
        .sensors
        .get(condition)
        .ok_or_else(|| SimError::NoSurrogate {
            condition: condition.to_string(),
            modality: "*".into(),
        })?;
    Ok(sensors
        .surrogates
        .iter()
        .map(|s| s.predict(truth, rng))
        .collect())
}

/// One fused decision, as logged for traces and accuracy accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub condition: String,
    pub t: f64,
    pub votes: Vec<ModalityPrediction>,
    pub weighted_sum: f64,
    pub verdict: bool,
    pub truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum World {
    Capping(CappingWorld),
    Insertion(InsertionWorld),
}

impl World {
    fn truth(&self, condition: &str) -> Option<bool> {
        match self {
            World::Capping(w) => w.truth(condition),
            World::Insertion(w) => w.truth(condition),
        }
    }

    pub fn task_succeeded(&self) -> bool {
        match self {
            World::Capping(w) => w.task_succeeded(),
            World::Insertion(w) => w.task_succeeded(),
        }
    }

    pub fn audit(&self) -> Result<(), SimError> {
        match self {
            World::Capping(w) => w.audit(),
            World::Insertion(w) => w.audit(),
        }
    }

    pub fn in_contact(&self) -> bool {
        match self {
            World::Capping(w) => w.in_contact(),
            World::Insertion(w) => w.in_contact(),
        }
    }

    pub fn fasten_iterations(&self) -> Option<u32> {
        match self {
            World::Capping(w) => Some(w.fasten_iter),
            World::Insertion(_) => None,
        }
    }
}

/// Seeded per-trial streams: stream `2t` drives the world and surrogates,
/// stream `2t + 1` drives synthetic traces so enabling them never changes
/// outcomes.
fn trial_streams(seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut main = ChaCha8Rng::seed_from_u64(seed);
    main.set_stream(trial.wrapping_mul(2));
    let mut aux = ChaCha8Rng::seed_from_u64(seed);
    aux.set_stream(trial.wrapping_mul(2).wrapping_add(1));
    (main, aux)
}

/// [`Handler`] that executes actions against a simulated world and answers
/// conditions from ground truth through surrogate sensors.
pub struct LabHandler<'s> {
    setup: &'s SimSetup,
    pub world: World,
    rng: ChaCha8Rng,
    trace_rng: ChaCha8Rng,
    pub votes: Vec<VoteRecord>,
    /// Check world invariants after every action.
    pub audit_each_step: bool,
}

impl<'s> LabHandler<'s> {
    pub fn new(setup: &'s SimSetup, seed: u64, trial: u64) -> Result<Self, SimError> {
        let (mut rng, trace_rng) = trial_streams(seed, trial);
        let class = setup.faults.class_for(trial);
        let world = match setup.task {
            Task::Capping => {
                World::Capping(CappingWorld::new(setup.capping.clone(), class, &mut rng))
            }
            Task::Insertion => {
                World::Insertion(InsertionWorld::new(setup.insertion.clone(), class))
            }
        };
        Ok(Self {
            setup,
            world,
            rng,
            trace_rng,
            votes: Vec::new(),
            audit_each_step: true,
        })
    }

    /// Like [`LabHandler::new`], with the world moved to the state in which
    /// `skill` normally starts.
    pub fn for_skill(
        setup: &'s SimSetup,
        seed: u64,
        trial: u64,
        skill: &str,
    ) -> Result<Self, SimError> {
        let mut h = Self::new(setup, seed, trial)?;
        match &mut h.world {
            World::Capping(w) => w.preset_for_skill(skill),
            World::Insertion(w) => w.preset_for_skill(skill, &setup.faults, &mut h.rng)?,
        }
        Ok(h)
    }

    fn deterministic(&self, name: &str, ctx: &Context) -> Result<bool, BtError> {
        let unknown = || BtError::UnknownHandler {
            kind: "condition",
            name: name.to_string(),
        };
        match (&self.world, name) {
            (World::Capping(w), "gripper_open") => Ok(!w.gripper_closed),
            (World::Insertion(w), "gripper_open") => Ok(!w.gripper_closed),
            (World::Capping(w), "max_iter_reached") => Ok(w.fasten_iter >= w.params.max_iterations),
            (World::Capping(w), "at_fasten_end") => Ok(w.at_fasten_end),
            (World::Capping(_), "capped_confirmed") => {
                Ok(ctx.blackboard.get_bool("verdict.fully_capped")?)
            }
            _ => Err(unknown()),
        }
    }

    fn fused(&mut self, spec: &ConditionSpec, ctx: &mut Context) -> Result<bool, SimError> {
        let truth = self
            .world
            .truth(&spec.name)
            .ok_or_else(|| SimError::UnknownCondition(spec.name.clone()))?;
        let sensors = self
            .setup
            .sensors
            .get(&spec.name)
            .ok_or_else(|| SimError::NoSurrogate {
                condition: spec.name.clone(),
                modality: spec
                    .policy
                    .as_ref()
                    .and_then(|p| p.modalities().first().cloned())
                    .unwrap_or_else(|| "*".into()),
            })?;
        let preds = sense(self.setup, &spec.name, truth, &mut self.rng)?;
        let verdict = vote(&preds, &sensors.policy, self.setup.rule)
            .map_err(|e| SimError::Param(e.to_string()))?;
        ctx.blackboard
            .put(format!("verdict.{}", spec.name), verdict.success);
        self.votes.push(VoteRecord {
            condition: spec.name.clone(),
            t: ctx.clock.now(),
            votes: preds,
            weighted_sum: verdict.weighted_sum,
            verdict: verdict.success,
            truth,
        });
        Ok(verdict.success)
    }

    fn side_effects(
        &mut self,
        spec: &ActionSpec,
        duration: f64,
        ctx: &mut Context,
    ) -> Result<(), SimError> {
        match spec.name.as_str() {
            "record_ft" | "record_tactile" if self.setup.synthesize_traces => {
                let series = synth_ft_trace(
                    duration,
                    &self.setup.ft,
                    self.world.in_contact(),
                    &mut self.trace_rng,
                )?;
                let key = if spec.name == "record_ft" {
                    "ft_trace"
                } else {
                    "tactile_trace"
                };
                ctx.blackboard.put(key, series);
            }
            "capture_rgb" | "capture_rgbd" => ctx
                .blackboard
                .put(format!("{}.t", spec.name), ctx.clock.now()),
            "inc_fasten_iter" => {
                if let Some(n) = self.world.fasten_iterations() {
                    ctx.blackboard.put("fasten_iter", i64::from(n));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

impl Handler for LabHandler<'_> {
    fn has_action(&self, name: &str) -> bool {
        self.setup.actions().contains(&name)
    }

    fn has_condition(&self, name: &str) -> bool {
        self.setup.fused_conditions().contains(&name)
            || self.setup.deterministic_conditions().contains(&name)
    }

    fn action(&mut self, spec: &ActionSpec, ctx: &mut Context) -> Result<Status, BtError> {
        let wrap = |e: SimError| BtError::handler(spec.name.clone(), e);
        let duration = self.setup.catalog.duration_of(spec).map_err(wrap)?;
        match &mut self.world {
            World::Capping(w) => w.apply(&spec.name, &self.setup.faults, &mut self.rng),
            World::Insertion(w) => w.apply(&spec.name, &self.setup.faults, &mut self.rng),
        }
        .map_err(wrap)?;
        if self.audit_each_step {
            self.world.audit().map_err(wrap)?;
        }
        self.side_effects(spec, duration, ctx).map_err(wrap)?;
        ctx.clock.advance(duration);
        Ok(Status::Success)
    }

    fn condition(&mut self, spec: &ConditionSpec, ctx: &mut Context) -> Result<Status, BtError> {
        let ok = if self.setup.fused_conditions().contains(&spec.name.as_str()) {
            self.fused(spec, ctx)
                .map_err(|e| BtError::handler(spec.name.clone(), e))?
        } else {
            self.deterministic(&spec.name, ctx)?
        };
        Ok(Status::from_bool(ok))
    }
}
