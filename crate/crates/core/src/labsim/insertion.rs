use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{require, FaultInjection, SimError, TrialClass};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsertionParams {
    /// Largest per-axis XY misalignment that still slides into the slot.
    pub tol_xy_mm: f64,
    pub tol_yaw_deg: f64,
}

impl Default for InsertionParams {
    fn default() -> Self {
        Self {
            tol_xy_mm: 2.0,
            tol_yaw_deg: 2.0,
        }
    }
}

impl InsertionParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.tol_xy_mm >= 0.0 && self.tol_yaw_deg >= 0.0) {
            return Err(SimError::Param(
                "insertion tolerances must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RackPose {
    Home,
    PrePick,
    Pick,
    PreInsert,
    /// Pushed down until contact in the slot.
    Inserted,
}

pub const ACTIONS: &[&str] = &[
    "move_home",
    "move_to_prepick",
    "move_to_pick",
    "close_gripper",
    "open_gripper",
    "move_to_preinsert",
    "capture_rgbd",
    "capture_rgb",
    "move_until_contact",
    "record_ft",
];

pub const FUSED_CONDITIONS: &[&str] = &["rack_aligned", "rack_inserted"];
pub const DETERMINISTIC_CONDITIONS: &[&str] = &["gripper_open"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InsertionWorld {
    pub params: InsertionParams,
    pub class: Option<TrialClass>,
    pub pose: RackPose,
    pub gripper_closed: bool,
    pub rack_grasped: bool,
    pub rack_dropped: bool,
    /// `[x_mm, y_mm, yaw_deg]` of the rack relative to the slot.
    pub offset: [f64; 3],
    pub aligned: bool,
    pub inserted: bool,
}

impl InsertionWorld {
    pub fn new(params: InsertionParams, class: Option<TrialClass>) -> Self {
        Self {
            params,
            class,
            pose: RackPose::Home,
            gripper_closed: true,
            rack_grasped: false,
            rack_dropped: false,
            offset: [0.0; 3],
            aligned: false,
            inserted: false,
        }
    }

    pub fn preset_for_skill<R: Rng + ?Sized>(
        &mut self,
        skill: &str,
        faults: &FaultInjection,
        rng: &mut R,
    ) -> Result<(), SimError> {
        match skill {
            "align_rack" => {
                self.pose = RackPose::PrePick;
                self.rack_grasped = true;
            }
            "insert_rack" => {
                self.pose = RackPose::PrePick;
                self.rack_grasped = true;
                self.apply("move_to_preinsert", faults, rng)?;
            }
            _ => {}
        }
        Ok(())
    }

    fn within_tolerance(&self, o: &[f64; 3]) -> bool {
        o[0].abs() <= self.params.tol_xy_mm
            && o[1].abs() <= self.params.tol_xy_mm
            && o[2].abs() <= self.params.tol_yaw_deg
    }

    pub fn apply<R: Rng + ?Sized>(
        &mut self,
        action: &str,
        faults: &FaultInjection,
        rng: &mut R,
    ) -> Result<(), SimError> {
        match action {
            "move_home" | "move_to_prepick" => {
                require(
                    !(self.pose == RackPose::Inserted && self.inserted && self.rack_grasped),
                    || "pulling an inserted rack out of its slot".into(),
                )?;
                self.pose = if action == "move_home" {
                    RackPose::Home
                } else {
                    RackPose::PrePick
                };
            }
            "move_to_pick" => {
                require(self.pose == RackPose::PrePick, || {
                    "pick pose is only reachable from pre-pick".into()
                })?;
                self.pose = RackPose::Pick;
            }
            "close_gripper" => {
                let was_open = !self.gripper_closed;
                self.gripper_closed = true;
                if was_open && self.pose == RackPose::Pick && !self.rack_dropped && !self.inserted {
                    self.rack_grasped = true;
                }
            }
            "open_gripper" => {
                self.gripper_closed = false;
                if self.rack_grasped {
                    self.rack_grasped = false;
                    if !self.inserted {
                        self.rack_dropped = true;
                    }
                }
            }
            "move_to_preinsert" => {
                self.pose = RackPose::PreInsert;
                let (xy, yaw) = (faults.insertion_offset_xy_mm, faults.insertion_yaw_deg);
                let class = self.class;
                self.offset = faults.sample_offset(
                    class,
                    [xy, xy, yaw],
                    |o| self.within_tolerance(o),
                    rng,
                )?;
                self.aligned = self.within_tolerance(&self.offset);
            }
            "move_until_contact" => {
                require(self.pose == RackPose::PreInsert, || {
                    "insertion must start from pre-insert".into()
                })?;
                self.pose = RackPose::Inserted;
                self.inserted = self.rack_grasped && self.aligned;
            }
            "capture_rgbd" | "capture_rgb" | "record_ft" => {}
            other => return Err(SimError::UnknownAction(other.to_string())),
        }
        Ok(())
    }

    pub fn truth(&self, condition: &str) -> Option<bool> {
        match condition {
            "rack_aligned" => {
                Some(self.rack_grasped && self.pose == RackPose::PreInsert && self.aligned)
            }
            "rack_inserted" => Some(self.inserted),
            _ => None,
        }
    }

    pub fn in_contact(&self) -> bool {
        self.pose == RackPose::Inserted && self.rack_grasped
    }

    pub fn task_succeeded(&self) -> bool {
        self.inserted
    }

    pub fn audit(&self) -> Result<(), SimError> {
        let fail = |m: &str| Err(SimError::Invariant(m.to_string()));
        if self.inserted && !self.aligned {
            return fail("inserted while misaligned");
        }
        if self.aligned && !self.within_tolerance(&self.offset) {
            return fail("alignment flag disagrees with the offset");
        }
        if self.rack_grasped && !self.gripper_closed {
            return fail("rack held by an open gripper");
        }
        if self.rack_dropped && self.rack_grasped {
            return fail("rack both dropped and held");
        }
        Ok(())
    }
}
