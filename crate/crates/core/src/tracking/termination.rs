//! Interaction early termination.

use super::{HumanoidSimState, ObjectSimState};
use crate::motion::{Vec3, CONTACT_CHANNELS};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TerminationConfig {
    /// Mean object-keypoint deviation limit (m).
    pub object_deviation: f64,
    /// Longest tolerated run of frames with an expected contact missing.
    pub missing_contact_frames: usize,
    /// Mean key-joint position deviation limit (m).
    pub humanoid_drift: f64,
}

impl Default for TerminationConfig {
    fn default() -> Self {
        Self {
            object_deviation: 0.5,
            missing_contact_frames: 10,
            humanoid_drift: 0.5,
        }
    }
}

impl TerminationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.object_deviation > 0.0
            && self.humanoid_drift > 0.0
            && self.missing_contact_frames > 0)
        {
            return Err(Error::invalid("termination limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    ObjectDeviation,
    ContactAbsence,
    HumanoidDrift,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ObjectDeviation => "object-deviation",
            Self::ContactAbsence => "contact-absence",
            Self::HumanoidDrift => "humanoid-drift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::ObjectDeviation,
            Self::ContactAbsence,
            Self::HumanoidDrift,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Termination {
    pub frame: usize,
    pub reason: TerminationReason,
}

/// Mean distance between corresponding object keypoints (object-local
/// `keypoints` placed by each pose).
pub fn keypoint_deviation(
    sim: &ObjectSimState,
    reference: &ObjectSimState,
    keypoints: &[Vec3],
) -> f64 {
    if keypoints.is_empty() {
        return (sim.position - reference.position).norm();
    }
    let total: f64 = keypoints
        .iter()
        .map(|k| {
            ((sim.orientation * k + sim.position)
                - (reference.orientation * k + reference.position))
                .norm()
        })
        .sum();
    total / keypoints.len() as f64
}

fn drift(sim: &HumanoidSimState, reference: &HumanoidSimState, key_joints: &[usize]) -> f64 {
    let total: f64 = key_joints
        .iter()
        .map(|&j| (sim.positions[j] - reference.positions[j]).norm())
        .sum();
    total / key_joints.len().max(1) as f64
}

/// Streaming termination check; feed frames in order.
#[derive(Clone, Debug)]
pub struct TerminationMonitor<'a> {
    config: &'a TerminationConfig,
    keypoints: &'a [Vec3],
    key_joints: &'a [usize],
    frame: usize,
    missing_run: usize,
}

impl<'a> TerminationMonitor<'a> {
    pub fn new(
        config: &'a TerminationConfig,
        keypoints: &'a [Vec3],
        key_joints: &'a [usize],
    ) -> Self {
        Self {
            config,
            keypoints,
            key_joints,
            frame: 0,
            missing_run: 0,
        }
    }

    /// Checks the next frame. When several conditions fire on the same frame
    /// the reported reason is object deviation, then contact absence, then
    /// humanoid drift.
    pub fn step(
        &mut self,
        sim: &HumanoidSimState,
        reference: &HumanoidSimState,
        sim_object: &ObjectSimState,
        ref_object: &ObjectSimState,
        expected: &[bool; CONTACT_CHANNELS],
    ) -> Option<Termination> {
        let frame = self.frame;
        self.frame += 1;
        let missing = (0..CONTACT_CHANNELS).any(|c| expected[c] && !sim_object.contacts[c]);
        self.missing_run = if missing { self.missing_run + 1 } else { 0 };
        let reason = if keypoint_deviation(sim_object, ref_object, self.keypoints)
            > self.config.object_deviation
        {
            Some(TerminationReason::ObjectDeviation)
        } else if self.missing_run > self.config.missing_contact_frames {
            Some(TerminationReason::ContactAbsence)
        } else if drift(sim, reference, self.key_joints) > self.config.humanoid_drift {
            Some(TerminationReason::HumanoidDrift)
        } else {
            None
        };
        reason.map(|reason| Termination { frame, reason })
    }
}

/// Earliest violation over a rollout prefix, if any.
pub fn check_early_termination(
    frames: &[super::RolloutFrame],
    keypoints: &[Vec3],
    key_joints: &[usize],
    config: &TerminationConfig,
) -> Option<Termination> {
    let mut m = TerminationMonitor::new(config, keypoints, key_joints);
    frames.iter().find_map(|f| {
        m.step(
            &f.sim,
            &f.reference,
            &f.sim_object,
            &f.ref_object,
            &f.ref_object.contacts,
        )
    })
}
