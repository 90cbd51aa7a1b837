//! Tracking-side machinery: observations, rewards, early termination and a
//! noise-injected oracle rollout that stands in for a physics policy.

mod rollout;
mod termination;

pub use rollout::{
    filter_successful_rollouts, oracle_rollout, reference_states, Fault, FaultKind, NoiseModel,
    RolloutConfig, RolloutFrame, RolloutLog, SuccessCriteria, WindowSpec,
};
pub use termination::{
    check_early_termination, keypoint_deviation, Termination, TerminationConfig,
    TerminationMonitor, TerminationReason,
};

use crate::motion::rotation::geodesic_distance;
use crate::motion::{rotation_difference, Mat3, Vec3, CONTACT_CHANNELS};
use crate::{Error, Result};

/// Per-link global state of the simulated (or reference) humanoid.
#[derive(Clone, Debug, PartialEq)]
pub struct HumanoidSimState {
    pub positions: Vec<Vec3>,
    pub orientations: Vec<Mat3>,
    pub linear_velocity: Vec<Vec3>,
    pub angular_velocity: Vec<Vec3>,
    /// Optional body-shape coefficients; empty when unused.
    pub shape: Vec<f64>,
}

impl HumanoidSimState {
    pub fn link_count(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.positions.len();
        if self.orientations.len() != j
            || self.linear_velocity.len() != j
            || self.angular_velocity.len() != j
        {
            return Err(Error::shape("humanoid state arrays differ in length"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSimState {
    pub position: Vec3,
    pub orientation: Mat3,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
    /// Contact flags: left hand, right hand, left foot, right foot.
    pub contacts: [bool; CONTACT_CHANNELS],
}

/// Per-channel XNOR: 1 where the flags agree.
pub fn xnor(a: &[bool; CONTACT_CHANNELS], b: &[bool; CONTACT_CHANNELS]) -> [f64; CONTACT_CHANNELS] {
    std::array::from_fn(|i| if a[i] == b[i] { 1.0 } else { 0.0 })
}

/// Contact channels expected by a soft label (`≥ 0.5`).
pub fn expected_contacts(c: &[f64; CONTACT_CHANNELS]) -> [bool; CONTACT_CHANNELS] {
    std::array::from_fn(|i| c[i] >= 0.5)
}

fn push_mat(out: &mut Vec<f64>, m: &Mat3) {
    for r in 0..3 {
        for c in 0..3 {
            out.push(m[(r, c)]);
        }
    }
}

fn push_vec(out: &mut Vec<f64>, v: &Vec3) {
    out.extend_from_slice(v.as_slice());
}

/// Humanoid goal observation. Layout, each block over all links in order:
/// `θ̂·θᵀ` (9 row-major), `p̂ − p` (3), `v̂ − v` (3), `ω̂ − ω` (3), `θ̂` (9),
/// `p̂` (3); `30·J` values in total.
pub fn build_humanoid_obs(
    sim: &HumanoidSimState,
    reference: &HumanoidSimState,
) -> Result<Vec<f64>> {
    sim.validate()?;
    reference.validate()?;
    let j = sim.link_count();
    if reference.link_count() != j {
        return Err(Error::shape(format!(
            "simulated state has {j} links, reference {}",
            reference.link_count()
        )));
    }
    let mut out = Vec::with_capacity(30 * j);
    for i in 0..j {
        push_mat(
            &mut out,
            &rotation_difference(&reference.orientations[i], &sim.orientations[i]),
        );
    }
    for i in 0..j {
        push_vec(&mut out, &(reference.positions[i] - sim.positions[i]));
    }
    for i in 0..j {
        push_vec(
            &mut out,
            &(reference.linear_velocity[i] - sim.linear_velocity[i]),
        );
    }
    for i in 0..j {
        push_vec(
            &mut out,
            &(reference.angular_velocity[i] - sim.angular_velocity[i]),
        );
    }
    for r in &reference.orientations {
        push_mat(&mut out, r);
    }
    for p in &reference.positions {
        push_vec(&mut out, p);
    }
    Ok(out)
}

/// Object goal observation: `θ̂·θᵀ` (9), `p̂ − p` (3), `v̂ − v` (3), `ω̂ − ω` (3),
/// `ĉ ⊙ c` (4), `θ̂` (9), `p̂` (3), `ĉ` (4); 38 values.
pub fn build_object_obs(
    sim: &ObjectSimState,
    reference: &ObjectSimState,
    expected: &[bool; CONTACT_CHANNELS],
) -> Vec<f64> {
    let mut out = Vec::with_capacity(38);
    push_mat(
        &mut out,
        &rotation_difference(&reference.orientation, &sim.orientation),
    );
    push_vec(&mut out, &(reference.position - sim.position));
    push_vec(&mut out, &(reference.linear_velocity - sim.linear_velocity));
    push_vec(
        &mut out,
        &(reference.angular_velocity - sim.angular_velocity),
    );
    out.extend(xnor(expected, &sim.contacts));
    push_mat(&mut out, &reference.orientation);
    push_vec(&mut out, &reference.position);
    out.extend(expected.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewardWeights {
    pub joint_position: f64,
    pub joint_rotation: f64,
    pub joint_velocity: f64,
    pub joint_angular: f64,
    pub contact: f64,
    pub object_position: f64,
    pub object_rotation: f64,
    pub object_velocity: f64,
    pub object_angular: f64,
    /// Blend between the human (`alpha`) and object (`1 − alpha`) rewards.
    pub alpha: f64,
    pub key_joints: Vec<usize>,
}

impl RewardWeights {
    /// Unit weights, `alpha = 0.5`.
    pub fn uniform(key_joints: Vec<usize>) -> Self {
        Self {
            joint_position: 1.0,
            joint_rotation: 1.0,
            joint_velocity: 1.0,
            joint_angular: 1.0,
            contact: 1.0,
            object_position: 1.0,
            object_rotation: 1.0,
            object_velocity: 1.0,
            object_angular: 1.0,
            alpha: 0.5,
            key_joints,
        }
    }

    fn human(&self) -> [f64; 5] {
        [
            self.joint_position,
            self.joint_rotation,
            self.joint_velocity,
            self.joint_angular,
            self.contact,
        ]
    }

    fn object(&self) -> [f64; 4] {
        [
            self.object_position,
            self.object_rotation,
            self.object_velocity,
            self.object_angular,
        ]
    }

    pub fn validate(&self, link_count: usize) -> Result<()> {
        let all = self.human().into_iter().chain(self.object());
        if all.clone().any(|w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid(
                "reward weights must be finite and nonnegative",
            ));
        }
        if self.human().iter().sum::<f64>() <= 0.0 || self.object().iter().sum::<f64>() <= 0.0 {
            return Err(Error::invalid(
                "human and object reward weights must each have a positive sum",
            ));
        }
        check_alpha(self.alpha)?;
        if self.key_joints.is_empty() {
            return Err(Error::invalid("key joint set is empty"));
        }
        if let Some(j) = self.key_joints.iter().find(|&&j| j >= link_count) {
            return Err(Error::invalid(format!(
                "key joint {j} out of range for {link_count} links"
            )));
        }
        Ok(())
    }

    /// Reward of a perfectly tracked frame with full contact agreement.
    pub fn perfect_reward(&self) -> f64 {
        let h = self.joint_position
            + self.joint_rotation
            + self.joint_velocity
            + self.joint_angular
            + 2.0 * self.contact;
        let o: f64 = self.object().iter().sum();
        self.alpha * h + (1.0 - self.alpha) * o
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!(
            "alpha must be in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Weighted human reward terms; `total` is their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HumanReward {
    pub position: f64,
    pub rotation: f64,
    pub velocity: f64,
    pub angular: f64,
    pub contact: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectReward {
    pub position: f64,
    pub rotation: f64,
    pub velocity: f64,
    pub angular: f64,
    pub total: f64,
}

fn stacked_norm<'a>(a: impl Iterator<Item = &'a Vec3>, b: impl Iterator<Item = &'a Vec3>) -> f64 {
    a.zip(b)
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Human tracking reward over the key joints. Position, velocity and angular
/// velocity errors are Euclidean norms of the stacked key-joint errors; the
/// rotation error sums geodesic angles. The contact term is the L2 norm of the
/// XNOR vector.
pub fn human_tracking_reward(
    sim: &HumanoidSimState,
    reference: &HumanoidSimState,
    expected: &[bool; CONTACT_CHANNELS],
    actual: &[bool; CONTACT_CHANNELS],
    w: &RewardWeights,
) -> Result<HumanReward> {
    if sim.link_count() != reference.link_count() {
        return Err(Error::shape("simulated and reference link counts differ"));
    }
    w.validate(sim.link_count())?;
    let k = &w.key_joints;
    let dp = stacked_norm(
        k.iter().map(|&j| &sim.positions[j]),
        k.iter().map(|&j| &reference.positions[j]),
    );
    let dq: f64 = k
        .iter()
        .map(|&j| geodesic_distance(&sim.orientations[j], &reference.orientations[j]))
        .sum();
    let dv = stacked_norm(
        k.iter().map(|&j| &sim.linear_velocity[j]),
        k.iter().map(|&j| &reference.linear_velocity[j]),
    );
    let dw = stacked_norm(
        k.iter().map(|&j| &sim.angular_velocity[j]),
        k.iter().map(|&j| &reference.angular_velocity[j]),
    );
    let agree = xnor(expected, actual)
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let position = w.joint_position * (-100.0 * dp).exp();
    let rotation = w.joint_rotation * (-10.0 * dq).exp();
    let velocity = w.joint_velocity * (-0.1 * dv).exp();
    let angular = w.joint_angular * (-0.1 * dw).exp();
    let contact = w.contact * agree;
    Ok(HumanReward {
        position,
        rotation,
        velocity,
        angular,
        contact,
        total: position + rotation + velocity + angular + contact,
    })
}

pub fn object_reward(
    sim: &ObjectSimState,
    reference: &ObjectSimState,
    w: &RewardWeights,
) -> ObjectReward {
    let position = w.object_position * (-100.0 * (sim.position - reference.position).norm()).exp();
    let rotation = w.object_rotation
        * (-10.0 * geodesic_distance(&sim.orientation, &reference.orientation)).exp();
    let velocity =
        w.object_velocity * (-5.0 * (sim.linear_velocity - reference.linear_velocity).norm()).exp();
    let angular = w.object_angular
        * (-5.0 * (sim.angular_velocity - reference.angular_velocity).norm()).exp();
    ObjectReward {
        position,
        rotation,
        velocity,
        angular,
        total: position + rotation + velocity + angular,
    }
}

/// `α·r_human + (1 − α)·r_object`.
pub fn total_reward(human: f64, object: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * human + (1.0 - alpha) * object)
}
