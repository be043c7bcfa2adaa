//! Simulated laboratory worlds for vial capping and rack insertion.
//!
//! Each world tracks the physical state a real cell would have (gripper,
//! pose, cap or rack placement) and exposes ground truth for every fused
//! condition. Sensors are surrogates: each modality flips the true label
//! according to its sensitivity and specificity.

use serde::{Deserialize, Serialize};

mod capping;
mod catalog;
mod faults;
mod ft;
mod handler;
mod insertion;
mod surrogate;

pub use capping::{CapPose, CappingParams, CappingWorld};
pub use catalog::ActionCatalog;
pub use faults::{trial_class, FaultInjection, TrialClass};
pub use ft::{preprocess_ft, synth_ft_trace, zero_center, FtSynthParams};
pub use handler::{sense, ConditionSensors, LabHandler, SimSetup, VoteRecord, World};
pub use insertion::{InsertionParams, InsertionWorld, RackPose};
pub use surrogate::SensorSurrogate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Capping,
    Insertion,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Capping => "capping",
            Task::Insertion => "insertion",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "capping" => Some(Task::Capping),
            "insertion" => Some(Task::Insertion),
            _ => None,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    /// An action the real hardware could not perform in the current state.
    #[error("physical order violation: {0}")]
    PhysicalOrder(String),
    #[error("no surrogate for modality `{modality}` of condition `{condition}`")]
    NoSurrogate { condition: String, modality: String },
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown condition `{0}`")]
    UnknownCondition(String),
    #[error("smoothing window {window} is invalid for a series of length {len}")]
    Window { window: usize, len: usize },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("world invariant violated: {0}")]
    Invariant(String),
}

/// Physical state shared by both worlds' grippers.
pub(crate) fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), SimError> {
    if ok {
        Ok(())
    } else {
        Err(SimError::PhysicalOrder(msg()))
    }
}
