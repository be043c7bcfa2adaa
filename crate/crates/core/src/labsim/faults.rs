use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimError;

/// Whether a trial's setup is meant to succeed (proper) or to be misplaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialClass {
    Proper,
    Improper,
}

/// Even trials are proper, odd trials improper.
pub fn trial_class(trial: u64) -> TrialClass {
    if trial.is_multiple_of(2) {
        TrialClass::Proper
    } else {
        TrialClass::Improper
    }
}

/// Positional perturbations applied when the arm approaches the mount or
/// insertion pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultInjection {
    pub enabled: bool,
    /// Alternate proper (zero offset) and improper (out-of-tolerance offset)
    /// trials instead of drawing every offset from the full range.
    pub alternate_classes: bool,
    /// Half-width of the square XY offset range for cap mounting.
    pub capping_offset_mm: f64,
    pub insertion_offset_xy_mm: f64,
    pub insertion_yaw_deg: f64,
}

impl Default for FaultInjection {
    fn default() -> Self {
        Self {
            enabled: false,
            alternate_classes: false,
            capping_offset_mm: 10.0,
            insertion_offset_xy_mm: 2.5,
            insertion_yaw_deg: 2.5,
        }
    }
}

const MAX_REJECTIONS: usize = 100_000;

impl FaultInjection {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [
            ("capping_offset_mm", self.capping_offset_mm),
            ("insertion_offset_xy_mm", self.insertion_offset_xy_mm),
            ("insertion_yaw_deg", self.insertion_yaw_deg),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::Param(format!(
                    "faults.{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Class used for the trial, if the alternating protocol is active.
    pub fn class_for(&self, trial: u64) -> Option<TrialClass> {
        (self.enabled && self.alternate_classes).then(|| trial_class(trial))
    }

    /// Draws an offset vector. `ranges` are half-widths of independent uniform
    /// components; `within` decides whether a sample counts as in tolerance.
    /// Improper trials reject samples until one falls outside tolerance.
    pub(crate) fn sample_offset<R: Rng + ?Sized, const N: usize>(
        &self,
        class: Option<TrialClass>,
        ranges: [f64; N],
        within: impl Fn(&[f64; N]) -> bool,
        rng: &mut R,
    ) -> Result<[f64; N], SimError> {
        if !self.enabled || class == Some(TrialClass::Proper) {
            return Ok([0.0; N]);
        }
        let draw = |rng: &mut R| {
            let mut out = [0.0; N];
            for (o, r) in out.iter_mut().zip(ranges) {
                *o = if r > 0.0 {
                    rng.random_range(-r..=r)
                } else {
                    0.0
                };
            }
            out
        };
        if class.is_none() {
            return Ok(draw(rng));
        }
        for _ in 0..MAX_REJECTIONS {
            let s = draw(rng);
            if !within(&s) {
                return Ok(s);
            }
        }
        Err(SimError::Param(
            "offset range never exceeds the tolerance; improper trials cannot be generated".into(),
        ))
    }
}
