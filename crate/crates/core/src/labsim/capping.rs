use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{require, FaultInjection, SimError, TrialClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CappingParams {
    /// Largest per-axis XY offset at which the cap still engages the thread.
    pub thread_engage_tol_mm: f64,
    /// Inclusive range of quarter turns needed to seal a correctly seated cap.
    pub required_turns: [u32; 2],
    /// Fasten iterations allowed before the guard stops the loop.
    pub max_iterations: u32,
    /// Chance that a seated cap cross-threads and never locks.
    pub cross_thread_prob: f64,
}

impl Default for CappingParams {
    fn default() -> Self {
        Self {
            thread_engage_tol_mm: 3.0,
            required_turns: [6, 11],
            max_iterations: 12,
            cross_thread_prob: 0.03,
        }
    }
}

impl CappingParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let [lo, hi] = self.required_turns;
        if lo == 0 || lo > hi {
            return Err(SimError::Param(format!(
                "required_turns [{lo}, {hi}] must be a non-empty range of positive counts"
            )));
        }
        if self.max_iterations == 0 {
            return Err(SimError::Param("max_iterations must be positive".into()));
        }
        if !(self.thread_engage_tol_mm.is_finite() && self.thread_engage_tol_mm >= 0.0) {
            return Err(SimError::Param(
                "thread_engage_tol_mm must be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.cross_thread_prob) {
            return Err(SimError::Param(
                "cross_thread_prob must be within [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPose {
    Home,
    PrePick,
    Pick,
    PreMount,
    /// Cap pressed onto the vial mouth.
    Contact,
}

pub const ACTIONS: &[&str] = &[
    "move_home",
    "move_to_prepick",
    "move_to_pick",
    "close_gripper",
    "open_gripper",
    "move_to_premount",
    "move_until_contact",
    "record_ft",
    "record_tactile",
    "capture_rgb",
    "rotate_cw_90",
    "rotate_ccw_90",
    "inc_fasten_iter",
];

pub const FUSED_CONDITIONS: &[&str] = &["mount_aligned", "fully_capped"];
pub const DETERMINISTIC_CONDITIONS: &[&str] = &[
    "gripper_open",
    "max_iter_reached",
    "at_fasten_end",
    "capped_confirmed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CappingWorld {
    pub params: CappingParams,
    pub class: Option<TrialClass>,
    pub pose: CapPose,
    pub gripper_closed: bool,
    pub cap_grasped: bool,
    pub cap_dropped: bool,
    pub offset_mm: [f64; 2],
    /// Cap seated on the thread.
    pub mounted: bool,
    pub required_turns: u32,
    pub never_locks: bool,
    pub applied_turns: u32,
    /// Wrist at the clockwise end of its quarter-turn stroke.
    pub at_fasten_end: bool,
    pub sealed: bool,
    pub fasten_iter: u32,
}

impl CappingWorld {
    /// Fresh trial: arm at home, gripper closed, cap in its holder. Consumes
    /// two draws (required turns, cross-threading).
    pub fn new<R: Rng + ?Sized>(
        params: CappingParams,
        class: Option<TrialClass>,
        rng: &mut R,
    ) -> Self {
        let [lo, hi] = params.required_turns;
        let required_turns = rng.random_range(lo..=hi);
        let never_locks = rng.random::<f64>() < params.cross_thread_prob;
        Self {
            params,
            class,
            pose: CapPose::Home,
            gripper_closed: true,
            cap_grasped: false,
            cap_dropped: false,
            offset_mm: [0.0; 2],
            mounted: false,
            required_turns,
            never_locks,
            applied_turns: 0,
            at_fasten_end: false,
            sealed: false,
            fasten_iter: 0,
        }
    }

    /// Starting state for evaluating one skill in isolation.
    pub fn preset_for_skill(&mut self, skill: &str) {
        match skill {
            "mount_cap" => {
                self.pose = CapPose::PrePick;
                self.cap_grasped = true;
            }
            "fasten_cap" => {
                self.pose = CapPose::Contact;
                self.cap_grasped = true;
                self.mounted = true;
                match self.class {
                    Some(TrialClass::Proper) => {
                        self.required_turns = 1;
                        self.never_locks = false;
                    }
                    Some(TrialClass::Improper) => self.never_locks = true,
                    None => {}
                }
            }
            _ => {}
        }
    }

    fn within_tolerance(&self, off: &[f64; 2]) -> bool {
        let tol = self.params.thread_engage_tol_mm;
        off[0].abs() <= tol && off[1].abs() <= tol
    }

    fn leave_contact(&mut self) -> Result<(), SimError> {
        if self.pose == CapPose::Contact && self.cap_grasped {
            require(!self.sealed, || {
                "cannot pull a sealed cap off the vial".into()
            })?;
            self.mounted = false;
        }
        Ok(())
    }

    pub fn apply<R: Rng + ?Sized>(
        &mut self,
        action: &str,
        faults: &FaultInjection,
        rng: &mut R,
    ) -> Result<(), SimError> {
        match action {
            "move_home" => {
                self.leave_contact()?;
                self.pose = CapPose::Home;
            }
            "move_to_prepick" => {
                self.leave_contact()?;
                self.pose = CapPose::PrePick;
            }
            "move_to_pick" => {
                require(self.pose == CapPose::PrePick, || {
                    "pick pose is only reachable from pre-pick".into()
                })?;
                self.pose = CapPose::Pick;
            }
            "close_gripper" => {
                let was_open = !self.gripper_closed;
                self.gripper_closed = true;
                if was_open {
                    match self.pose {
                        CapPose::Pick if !self.cap_dropped && !self.mounted => {
                            self.cap_grasped = true
                        }
                        CapPose::Contact if self.mounted => self.cap_grasped = true,
                        _ => {}
                    }
                }
            }
            "open_gripper" => {
                self.gripper_closed = false;
                if self.cap_grasped {
                    self.cap_grasped = false;
                    if !(self.pose == CapPose::Contact && self.mounted) {
                        self.cap_dropped = true;
                        self.mounted = false;
                    }
                }
            }
            "move_to_premount" => {
                self.leave_contact()?;
                self.pose = CapPose::PreMount;
                let r = faults.capping_offset_mm;
                let class = self.class;
                self.offset_mm =
                    faults.sample_offset(class, [r, r], |o| self.within_tolerance(o), rng)?;
            }
            "move_until_contact" => {
                require(self.pose == CapPose::PreMount, || {
                    "contact approach must start from pre-mount".into()
                })?;
                self.pose = CapPose::Contact;
                self.mounted = self.cap_grasped && self.within_tolerance(&self.offset_mm);
            }
            "record_ft" | "record_tactile" | "capture_rgb" => {}
            "rotate_cw_90" => {
                require(self.pose == CapPose::Contact, || {
                    "rotating away from the vial".into()
                })?;
                require(self.gripper_closed, || {
                    "rotating clockwise with the gripper open".into()
                })?;
                require(!self.at_fasten_end, || {
                    "wrist already at the end of its clockwise stroke".into()
                })?;
                self.at_fasten_end = true;
                if self.cap_grasped && self.mounted && !self.never_locks {
                    self.applied_turns += 1;
                    self.sealed = self.applied_turns >= self.required_turns;
                }
            }
            "rotate_ccw_90" => {
                require(self.pose == CapPose::Contact, || {
                    "rotating away from the vial".into()
                })?;
                require(!self.gripper_closed, || {
                    "counter-clockwise reset with a closed gripper would unscrew the cap".into()
                })?;
                require(self.at_fasten_end, || {
                    "wrist is not at the end of its clockwise stroke".into()
                })?;
                self.at_fasten_end = false;
            }
            "inc_fasten_iter" => {
                require(self.fasten_iter < self.params.max_iterations, || {
                    format!(
                        "fasten iteration {} exceeds the limit of {}",
                        self.fasten_iter + 1,
                        self.params.max_iterations
                    )
                })?;
                self.fasten_iter += 1;
            }
            other => return Err(SimError::UnknownAction(other.to_string())),
        }
        Ok(())
    }

    /// Ground truth of a fused condition.
    pub fn truth(&self, condition: &str) -> Option<bool> {
        match condition {
            "mount_aligned" => Some(self.mounted),
            "fully_capped" => Some(self.sealed),
            _ => None,
        }
    }

    pub fn in_contact(&self) -> bool {
        self.pose == CapPose::Contact && self.cap_grasped
    }

    pub fn task_succeeded(&self) -> bool {
        self.sealed
    }

    pub fn audit(&self) -> Result<(), SimError> {
        let fail = |m: &str| Err(SimError::Invariant(m.to_string()));
        if self.sealed
            && !(self.mounted && self.applied_turns >= self.required_turns && !self.never_locks)
        {
            return fail("sealed without a seated cap and enough turns");
        }
        if self.cap_dropped && (self.mounted || self.sealed) {
            return fail("dropped cap counted as mounted");
        }
        if self.fasten_iter > self.params.max_iterations {
            return fail("fasten iterations exceed the limit");
        }
        if self.cap_grasped && !self.gripper_closed {
            return fail("cap held by an open gripper");
        }
        Ok(())
    }
}
