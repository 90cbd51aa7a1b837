use super::MM;
use crate::motion::rotation::geodesic_distance;
use crate::motion::{Vec3, CONTACT_CHANNELS};
use crate::tracking::{RolloutLog, SuccessCriteria};
use crate::{Error, Result};

/// Shortest expected-contact segment that must see a correct contact.
pub const MIN_CONTACT_SEGMENT: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct TrackingMetricConfig {
    pub success: SuccessCriteria,
    pub min_contact_segment: usize,
}

impl Default for TrackingMetricConfig {
    fn default() -> Self {
        Self {
            success: SuccessCriteria::default(),
            min_contact_segment: MIN_CONTACT_SEGMENT,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackingMetrics {
    pub name: String,
    pub succ_cont: bool,
    pub succ_tgt: bool,
    pub ttr: f64,
    /// mm
    pub e_pos: f64,
    pub e_pos_obj: f64,
    /// rad
    pub e_rot: f64,
    pub e_rot_obj: f64,
    /// mm/s²
    pub e_acc_obj: f64,
    /// mm/s
    pub e_vel_obj: f64,
}

/// Contact success: every run of frames expecting some contact that lasts at
/// least `min_segment` frames holds a frame where an expected channel is in
/// contact, and no frame shows contact on a channel the reference never
/// expects.
fn contact_success(log: &RolloutLog, min_segment: usize) -> bool {
    let expected: Vec<[bool; CONTACT_CHANNELS]> =
        log.frames.iter().map(|f| f.ref_object.contacts).collect();
    let actual: Vec<[bool; CONTACT_CHANNELS]> =
        log.frames.iter().map(|f| f.sim_object.contacts).collect();
    let allowed: [bool; CONTACT_CHANNELS] = std::array::from_fn(|c| expected.iter().any(|e| e[c]));
    if actual
        .iter()
        .any(|a| (0..CONTACT_CHANNELS).any(|c| a[c] && !allowed[c]))
    {
        return false;
    }
    let mut t = 0;
    while t < expected.len() {
        if !expected[t].contains(&true) {
            t += 1;
            continue;
        }
        let start = t;
        while t < expected.len() && expected[t].contains(&true) {
            t += 1;
        }
        let hit = (start..t).any(|i| (0..CONTACT_CHANNELS).any(|c| expected[i][c] && actual[i][c]));
        if t - start >= min_segment && !hit {
            return false;
        }
    }
    true
}

/// Tracking metrics over the executed frames of a rollout. `target` defaults
/// to the rollout's own target (see [`SuccessCriteria::target_of`]).
pub fn tracking_metrics(
    log: &RolloutLog,
    target: Option<&Vec3>,
    key_joints: &[usize],
    cfg: &TrackingMetricConfig,
) -> Result<TrackingMetrics> {
    let n = log.frames.len();
    if n == 0 {
        return Err(Error::invalid("rollout has no frames"));
    }
    if key_joints.is_empty() {
        return Err(Error::invalid("key joint set is empty"));
    }
    let target = target
        .copied()
        .or_else(|| SuccessCriteria::target_of(log))
        .ok_or_else(|| Error::invalid("no target"))?;
    let (mut pos, mut rot, mut opos, mut orot, mut ovel) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for f in &log.frames {
        for &j in key_joints {
            pos += (f.sim.positions[j] - f.reference.positions[j]).norm();
            rot += geodesic_distance(&f.sim.orientations[j], &f.reference.orientations[j]);
        }
        opos += (f.sim_object.position - f.ref_object.position).norm();
        orot += geodesic_distance(&f.sim_object.orientation, &f.ref_object.orientation);
        ovel += (f.sim_object.linear_velocity - f.ref_object.linear_velocity).norm();
    }
    let acc = |g: &dyn Fn(usize) -> Vec3| -> Vec<Vec3> {
        (1..n).map(|t| (g(t) - g(t - 1)) * log.frame_rate).collect()
    };
    let sa = acc(&|t| log.frames[t].sim_object.linear_velocity);
    let ra = acc(&|t| log.frames[t].ref_object.linear_velocity);
    let e_acc = if n > 1 {
        sa.iter().zip(&ra).map(|(a, b)| (a - b).norm()).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let nk = (n * key_joints.len()) as f64;
    let last = &log.frames[n - 1].sim_object.position;
    Ok(TrackingMetrics {
        name: log.meta.name.clone(),
        succ_cont: contact_success(log, cfg.min_contact_segment),
        succ_tgt: log.termination.is_none() && cfg.success.reaches_target(last, &target),
        ttr: log.tracked_ratio(),
        e_pos: pos / nk * MM,
        e_pos_obj: opos / n as f64 * MM,
        e_rot: rot / nk,
        e_rot_obj: orot / n as f64,
        e_acc_obj: e_acc * MM,
        e_vel_obj: ovel / n as f64 * MM,
    })
}
