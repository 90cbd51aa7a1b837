//! Oracle rollouts: the reference replayed with injected noise and faults.

use std::sync::Arc;

use rand_distr::{Distribution, Normal};

use super::termination::{Termination, TerminationConfig, TerminationMonitor, TerminationReason};
use super::{
    expected_contacts, human_tracking_reward, object_reward, total_reward, HumanReward,
    HumanoidSimState, ObjectReward, ObjectSimState, RewardWeights,
};
use crate::format::{read_meta, read_skeleton, write_meta, write_skeleton, Chunk};
use crate::keyaction::{build_training_windows, extract_key_actions, JointWeights, TrainingWindow};
use crate::motion::rotation::check_rotation;
use crate::motion::{
    finite_difference_velocities, global_to_relative, relative_to_global, rigid_velocities,
    ContactChannels, GlobalMotion, HoiSequence, Mat3, ObjectPose, ObjectTrajectory, SequenceMeta,
    SkeletonSpec, Vec3, CONTACT_CHANNELS, ROTATION_TOL,
};
use crate::rng::substream;
use crate::{Error, Exec, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum FaultKind {
    /// Translate the simulated object.
    ObjectOffset(Vec3),
    /// Translate every simulated link.
    HumanOffset(Vec3),
    /// Clear all simulated contact flags.
    DropContacts,
}

/// A fault active on frames `start..end` (`end = None`: until the end).
#[derive(Clone, Debug, PartialEq)]
pub struct Fault {
    pub start: usize,
    pub end: Option<usize>,
    pub kind: FaultKind,
}

impl Fault {
    fn active(&self, t: usize) -> bool {
        t >= self.start && self.end.is_none_or(|e| t < e)
    }
}

/// Gaussian position jitter (σ in metres, per coordinate) plus scripted faults.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NoiseModel {
    pub sigma: f64,
    pub faults: Vec<Fault>,
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self {
            sigma,
            faults: vec![],
        }
    }

    pub fn scripted(faults: Vec<Fault>) -> Self {
        Self { sigma: 0.0, faults }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutConfig {
    pub weights: RewardWeights,
    pub termination: TerminationConfig,
    pub noise: NoiseModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutFrame {
    pub sim: HumanoidSimState,
    pub reference: HumanoidSimState,
    pub sim_object: ObjectSimState,
    /// Reference object state; its contact flags are the expected contacts.
    pub ref_object: ObjectSimState,
    pub human: HumanReward,
    pub object: ObjectReward,
    pub total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutLog {
    pub meta: SequenceMeta,
    pub skeleton: Arc<SkeletonSpec>,
    pub frame_rate: f64,
    /// Length of the reference; `frames` stops early on termination.
    pub total_frames: usize,
    pub frames: Vec<RolloutFrame>,
    pub termination: Option<Termination>,
}

/// Reference humanoid and object states of a sequence.
pub fn reference_states(seq: &HoiSequence) -> Result<(Vec<HumanoidSimState>, Vec<ObjectSimState>)> {
    let g = relative_to_global(&seq.motion)?;
    let human = (0..g.len())
        .map(|t| HumanoidSimState {
            positions: g.positions[t].clone(),
            orientations: g.orientations[t].clone(),
            linear_velocity: g.linear_velocity[t].clone(),
            angular_velocity: g.angular_velocity[t].clone(),
            shape: vec![],
        })
        .collect();
    let (v, w) = rigid_velocities(
        &seq.object.positions(),
        &seq.object.rotations(),
        seq.object.frame_rate,
    )?;
    let object = seq
        .object
        .poses
        .iter()
        .enumerate()
        .map(|(t, p)| ObjectSimState {
            position: p.position,
            orientation: p.rotation,
            linear_velocity: v[t],
            angular_velocity: w[t],
            contacts: expected_contacts(&seq.contacts.frames[t]),
        })
        .collect();
    Ok((human, object))
}

/// Replays `reference` under `cfg.noise`, scoring every frame and stopping at
/// the first termination. Velocities of the perturbed states are recomputed
/// by finite differences. Jitter draws come from `seed` alone.
pub fn oracle_rollout(
    reference: &HoiSequence,
    keypoints: &[Vec3],
    cfg: &RolloutConfig,
    seed: u64,
) -> Result<RolloutLog> {
    reference.validate()?;
    let j = reference.skeleton().joint_count();
    cfg.weights.validate(j)?;
    cfg.termination.validate()?;
    let sigma = cfg.noise.sigma;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    let (ref_h, ref_o) = reference_states(reference)?;
    let t_len = ref_h.len();
    let mut rng = substream(seed, "rollout");
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut jitter = || {
        if sigma > 0.0 {
            Vec3::from_fn(|_, _| normal.sample(&mut rng))
        } else {
            Vec3::zeros()
        }
    };

    let mut positions = Vec::with_capacity(t_len);
    let mut obj_pos = Vec::with_capacity(t_len);
    let mut contacts = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut human_shift = Vec3::zeros();
        let mut object_shift = Vec3::zeros();
        let mut c = ref_o[t].contacts;
        for f in cfg.noise.faults.iter().filter(|f| f.active(t)) {
            match f.kind {
                FaultKind::ObjectOffset(d) => object_shift += d,
                FaultKind::HumanOffset(d) => human_shift += d,
                FaultKind::DropContacts => c = [false; CONTACT_CHANNELS],
            }
        }
        positions.push(
            ref_h[t]
                .positions
                .iter()
                .map(|p| p + human_shift + jitter())
                .collect::<Vec<_>>(),
        );
        obj_pos.push(ref_o[t].position + object_shift + jitter());
        contacts.push(c);
    }
    let orientations: Vec<Vec<Mat3>> = ref_h.iter().map(|s| s.orientations.clone()).collect();
    let (lin, ang) =
        finite_difference_velocities(&positions, &orientations, reference.motion.frame_rate)?;
    let obj_rot: Vec<Mat3> = ref_o.iter().map(|s| s.orientation).collect();
    let (ov, ow) = rigid_velocities(&obj_pos, &obj_rot, reference.object.frame_rate)?;

    let w = &cfg.weights;
    let mut monitor = TerminationMonitor::new(&cfg.termination, keypoints, &w.key_joints);
    let mut frames = Vec::with_capacity(t_len);
    let mut termination = None;
    for t in 0..t_len {
        let sim = HumanoidSimState {
            positions: positions[t].clone(),
            orientations: orientations[t].clone(),
            linear_velocity: lin[t].clone(),
            angular_velocity: ang[t].clone(),
            shape: vec![],
        };
        let sim_object = ObjectSimState {
            position: obj_pos[t],
            orientation: obj_rot[t],
            linear_velocity: ov[t],
            angular_velocity: ow[t],
            contacts: contacts[t],
        };
        let expected = ref_o[t].contacts;
        let human = human_tracking_reward(&sim, &ref_h[t], &expected, &sim_object.contacts, w)?;
        let object = object_reward(&sim_object, &ref_o[t], w);
        let total = total_reward(human.total, object.total, w.alpha)?;
        termination = monitor.step(&sim, &ref_h[t], &sim_object, &ref_o[t], &expected);
        frames.push(RolloutFrame {
            sim,
            reference: ref_h[t].clone(),
            sim_object,
            ref_object: ref_o[t].clone(),
            human,
            object,
            total,
        });
        if termination.is_some() {
            break;
        }
    }
    Ok(RolloutLog {
        meta: reference.meta.clone(),
        skeleton: reference.skeleton().clone(),
        frame_rate: reference.motion.frame_rate,
        total_frames: t_len,
        frames,
        termination,
    })
}

const OBJECT_WIDTH: usize = 3 + 9 + 3 + 3 + CONTACT_CHANNELS;
const REWARD_WIDTH: usize = 12;

fn human_width(j: usize) -> usize {
    18 * j
}

fn row_width(j: usize) -> usize {
    2 * human_width(j) + 2 * OBJECT_WIDTH + REWARD_WIDTH
}

fn write_mat(out: &mut Vec<f64>, m: &Mat3) {
    for r in 0..3 {
        for c in 0..3 {
            out.push(m[(r, c)]);
        }
    }
}

fn write_human(out: &mut Vec<f64>, s: &HumanoidSimState) {
    s.positions
        .iter()
        .for_each(|p| out.extend_from_slice(p.as_slice()));
    s.orientations.iter().for_each(|m| write_mat(out, m));
    s.linear_velocity
        .iter()
        .for_each(|v| out.extend_from_slice(v.as_slice()));
    s.angular_velocity
        .iter()
        .for_each(|v| out.extend_from_slice(v.as_slice()));
}

fn write_object(out: &mut Vec<f64>, s: &ObjectSimState) {
    out.extend_from_slice(s.position.as_slice());
    write_mat(out, &s.orientation);
    out.extend_from_slice(s.linear_velocity.as_slice());
    out.extend_from_slice(s.angular_velocity.as_slice());
    out.extend(s.contacts.iter().map(|&c| if c { 1.0 } else { 0.0 }));
}

fn read_human(v: &[f64], j: usize, shape: &[f64]) -> HumanoidSimState {
    let vec3 = |o: usize| Vec3::new(v[o], v[o + 1], v[o + 2]);
    HumanoidSimState {
        positions: (0..j).map(|i| vec3(3 * i)).collect(),
        orientations: (0..j)
            .map(|i| Mat3::from_row_slice(&v[3 * j + 9 * i..3 * j + 9 * i + 9]))
            .collect(),
        linear_velocity: (0..j).map(|i| vec3(12 * j + 3 * i)).collect(),
        angular_velocity: (0..j).map(|i| vec3(15 * j + 3 * i)).collect(),
        shape: shape.to_vec(),
    }
}

fn read_object(v: &[f64]) -> ObjectSimState {
    ObjectSimState {
        position: Vec3::new(v[0], v[1], v[2]),
        orientation: Mat3::from_row_slice(&v[3..12]),
        linear_velocity: Vec3::new(v[12], v[13], v[14]),
        angular_velocity: Vec3::new(v[15], v[16], v[17]),
        contacts: std::array::from_fn(|c| v[18 + c] >= 0.5),
    }
}

impl RolloutLog {
    pub fn executed_frames(&self) -> usize {
        self.frames.len()
    }

    /// Tracked-time ratio: frames survived before termination over the
    /// reference length.
    pub fn tracked_ratio(&self) -> f64 {
        match self.termination {
            Some(t) => t.frame as f64 / self.total_frames as f64,
            None => 1.0,
        }
    }

    /// The executed motion as a sequence (G2R on the simulated links).
    pub fn executed_sequence(&self) -> Result<HoiSequence> {
        if self.frames.len() < 2 {
            return Err(Error::invalid("rollout has fewer than two executed frames"));
        }
        let positions: Vec<Vec<Vec3>> = self
            .frames
            .iter()
            .map(|f| f.sim.positions.clone())
            .collect();
        let orientations: Vec<Vec<Mat3>> = self
            .frames
            .iter()
            .map(|f| f.sim.orientations.clone())
            .collect();
        let (linear_velocity, angular_velocity) =
            finite_difference_velocities(&positions, &orientations, self.frame_rate)?;
        let g = GlobalMotion {
            positions,
            orientations,
            linear_velocity,
            angular_velocity,
            frame_rate: self.frame_rate,
            skeleton: self.skeleton.clone(),
        };
        let motion = global_to_relative(&g)?;
        let object = ObjectTrajectory {
            poses: self
                .frames
                .iter()
                .map(|f| ObjectPose::new(f.sim_object.position, f.sim_object.orientation))
                .collect(),
            frame_rate: self.frame_rate,
        };
        let contacts = ContactChannels {
            frames: self
                .frames
                .iter()
                .map(|f| f.sim_object.contacts.map(|c| if c { 1.0 } else { 0.0 }))
                .collect(),
        };
        HoiSequence::new(motion, object, contacts, self.meta.clone())
    }

    pub fn to_chunk(&self) -> Chunk {
        let j = self.skeleton.joint_count();
        let mut rows = Vec::with_capacity(self.frames.len() * row_width(j));
        for f in &self.frames {
            write_human(&mut rows, &f.sim);
            write_human(&mut rows, &f.reference);
            write_object(&mut rows, &f.sim_object);
            write_object(&mut rows, &f.ref_object);
            let (h, o) = (&f.human, &f.object);
            rows.extend([
                h.position, h.rotation, h.velocity, h.angular, h.contact, h.total,
            ]);
            rows.extend([
                o.position, o.rotation, o.velocity, o.angular, o.total, f.total,
            ]);
        }
        let (frame, reason) = match self.termination {
            Some(t) => (t.frame as i64, t.reason.as_str()),
            None => (-1, "none"),
        };
        let shape = self
            .frames
            .first()
            .map(|f| f.sim.shape.clone())
            .unwrap_or_default();
        let c = Chunk::new("rollout")
            .float("fps", self.frame_rate)
            .int("total_frames", self.total_frames as i64)
            .int("executed_frames", self.frames.len() as i64)
            .int("termination_frame", frame)
            .text("termination_reason", reason)
            .floats("shape", shape);
        let c = write_meta(write_skeleton(c, &self.skeleton), &self.meta);
        c.floats_rows("frames", rows, row_width(j))
    }

    pub fn from_chunk(chunk: &Chunk) -> Result<Self> {
        if chunk.tag != "rollout" {
            return Err(Error::format(format!(
                "expected a `rollout` chunk, found `{}`",
                chunk.tag
            )));
        }
        let skeleton = read_skeleton(chunk)?;
        let j = skeleton.joint_count();
        let n = chunk.get_usize("executed_frames")?;
        let total_frames = chunk.get_usize("total_frames")?;
        if n > total_frames {
            return Err(Error::format(format!(
                "{n} executed frames exceed the reference length {total_frames}"
            )));
        }
        let shape = chunk.get_floats("shape")?;
        let data = chunk.get_floats_len("frames", n * row_width(j))?;
        let hw = human_width(j);
        let mut frames = Vec::with_capacity(n);
        for row in data.chunks_exact(row_width(j)) {
            let sim = read_human(&row[..hw], j, shape);
            let reference = read_human(&row[hw..2 * hw], j, &[]);
            let sim_object = read_object(&row[2 * hw..2 * hw + OBJECT_WIDTH]);
            let ref_object = read_object(&row[2 * hw + OBJECT_WIDTH..2 * hw + 2 * OBJECT_WIDTH]);
            for m in sim
                .orientations
                .iter()
                .chain(&reference.orientations)
                .chain([&sim_object.orientation, &ref_object.orientation])
            {
                check_rotation(m, ROTATION_TOL)?;
            }
            let r = &row[2 * hw + 2 * OBJECT_WIDTH..];
            frames.push(RolloutFrame {
                sim,
                reference,
                sim_object,
                ref_object,
                human: HumanReward {
                    position: r[0],
                    rotation: r[1],
                    velocity: r[2],
                    angular: r[3],
                    contact: r[4],
                    total: r[5],
                },
                object: ObjectReward {
                    position: r[6],
                    rotation: r[7],
                    velocity: r[8],
                    angular: r[9],
                    total: r[10],
                },
                total: r[11],
            });
        }
        let term_frame = chunk.get_int("termination_frame")?;
        let reason = chunk.get_text("termination_reason")?;
        let termination = if term_frame < 0 {
            None
        } else {
            let reason = TerminationReason::parse(reason)
                .ok_or_else(|| Error::format(format!("unknown termination reason {reason:?}")))?;
            Some(Termination {
                frame: term_frame as usize,
                reason,
            })
        };
        Ok(Self {
            meta: read_meta(chunk)?,
            skeleton,
            frame_rate: chunk.get_float("fps")?,
            total_frames,
            frames,
            termination,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuccessCriteria {
    /// Final object distance to the target counted as success (closed: `≤`).
    pub target_radius: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self { target_radius: 0.5 }
    }
}

impl SuccessCriteria {
    /// Target of a rollout: the sequence target, else the reference's final
    /// object position.
    pub fn target_of(log: &RolloutLog) -> Option<Vec3> {
        log.meta
            .target
            .or_else(|| log.frames.last().map(|f| f.ref_object.position))
    }

    pub fn reaches_target(&self, final_position: &Vec3, target: &Vec3) -> bool {
        (final_position - target).norm() <= self.target_radius
    }

    pub fn succeeded(&self, log: &RolloutLog) -> bool {
        if log.termination.is_some() || log.frames.len() < log.total_frames {
            return false;
        }
        match (log.frames.last(), Self::target_of(log)) {
            (Some(f), Some(t)) => self.reaches_target(&f.sim_object.position, &t),
            _ => false,
        }
    }
}

/// How executed motions are cut into training windows.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSpec {
    pub epsilon: f64,
    pub weights: JointWeights,
    pub window_key_count: usize,
    pub stride: usize,
}

/// Training windows from the rollouts that ran to completion and reached
/// their target, in rollout order.
pub fn filter_successful_rollouts(
    rollouts: &[RolloutLog],
    criteria: &SuccessCriteria,
    spec: &WindowSpec,
    exec: Exec,
) -> Result<Vec<TrainingWindow>> {
    let kept: Vec<&RolloutLog> = rollouts.iter().filter(|r| criteria.succeeded(r)).collect();
    let per = exec.try_map(&kept, |log| {
        let seq = log.executed_sequence()?;
        let keys = extract_key_actions(&seq, spec.epsilon, &spec.weights)?;
        build_training_windows(&seq, &keys, spec.window_key_count, spec.stride)
    })?;
    Ok(per.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::super::check_early_termination;
    use super::*;
    use crate::format::Container;
    use crate::synth::{box_catalog, generate_sequence, SynthConfig};

    fn setup() -> (HoiSequence, Vec<Vec3>, RolloutConfig) {
        let seq = generate_sequence(&SynthConfig::default(), 0).unwrap();
        let mesh = &box_catalog()
            .into_iter()
            .find(|(n, _)| *n == seq.meta.object)
            .unwrap()
            .1;
        let cfg = RolloutConfig {
            weights: RewardWeights::uniform(seq.skeleton().key_joints()),
            termination: TerminationConfig::default(),
            noise: NoiseModel::zero(),
        };
        (seq, mesh.bbox_corners().to_vec(), cfg)
    }

    #[test]
    fn zero_noise_is_perfect() {
        let (seq, kp, cfg) = setup();
        let log = oracle_rollout(&seq, &kp, &cfg, 1).unwrap();
        assert!(log.termination.is_none());
        assert_eq!(log.frames.len(), seq.len());
        let perfect = cfg.weights.perfect_reward();
        for f in &log.frames {
            assert!((f.total - perfect).abs() < 1e-9);
        }
        assert_eq!(log.tracked_ratio(), 1.0);
    }

    #[test]
    fn jitter_lowers_every_frame() {
        let (seq, kp, mut cfg) = setup();
        cfg.noise = NoiseModel::gaussian(0.005);
        let log = oracle_rollout(&seq, &kp, &cfg, 1).unwrap();
        let perfect = cfg.weights.perfect_reward();
        assert!(log.frames.iter().all(|f| f.total < perfect));
        assert_eq!(log, oracle_rollout(&seq, &kp, &cfg, 1).unwrap());
        assert_ne!(log, oracle_rollout(&seq, &kp, &cfg, 2).unwrap());
    }

    #[test]
    fn scripted_faults_terminate() {
        let (seq, kp, mut cfg) = setup();
        cfg.noise = NoiseModel::scripted(vec![Fault {
            start: 30,
            end: None,
            kind: FaultKind::ObjectOffset(Vec3::new(0.6, 0.0, 0.0)),
        }]);
        let log = oracle_rollout(&seq, &kp, &cfg, 0).unwrap();
        assert_eq!(
            log.termination,
            Some(Termination {
                frame: 30,
                reason: TerminationReason::ObjectDeviation
            })
        );
        assert_eq!(log.frames.len(), 31);
        assert!((log.tracked_ratio() - 30.0 / seq.len() as f64).abs() < 1e-15);
        assert_eq!(
            check_early_termination(&log.frames, &kp, &cfg.weights.key_joints, &cfg.termination),
            log.termination
        );

        let carry = crate::synth::carry_interval(&seq).unwrap();
        let start = carry.0 + 5;
        cfg.noise = NoiseModel::scripted(vec![Fault {
            start,
            end: Some(start + 11),
            kind: FaultKind::DropContacts,
        }]);
        let log = oracle_rollout(&seq, &kp, &cfg, 0).unwrap();
        assert_eq!(
            log.termination,
            Some(Termination {
                frame: start + 10,
                reason: TerminationReason::ContactAbsence
            })
        );
        cfg.noise.faults[0].end = Some(start + 10);
        assert!(oracle_rollout(&seq, &kp, &cfg, 0)
            .unwrap()
            .termination
            .is_none());

        cfg.noise = NoiseModel::scripted(vec![Fault {
            start: 3,
            end: None,
            kind: FaultKind::HumanOffset(Vec3::new(0.0, 0.7, 0.0)),
        }]);
        let log = oracle_rollout(&seq, &kp, &cfg, 0).unwrap();
        assert_eq!(
            log.termination,
            Some(Termination {
                frame: 3,
                reason: TerminationReason::HumanoidDrift
            })
        );
    }

    #[test]
    fn prepending_clean_frames_shifts_termination() {
        let (seq, kp, mut cfg) = setup();
        cfg.noise = NoiseModel::scripted(vec![Fault {
            start: 40,
            end: None,
            kind: FaultKind::ObjectOffset(Vec3::new(0.0, 0.0, 0.6)),
        }]);
        let log = oracle_rollout(&seq, &kp, &cfg, 0).unwrap();
        let clean = oracle_rollout(
            &seq,
            &kp,
            &RolloutConfig {
                noise: NoiseModel::zero(),
                ..cfg.clone()
            },
            0,
        )
        .unwrap();
        for extra in [1, 7, 20] {
            let mut frames = clean.frames[..extra].to_vec();
            frames.extend(log.frames.iter().cloned());
            let t =
                check_early_termination(&frames, &kp, &cfg.weights.key_joints, &cfg.termination)
                    .unwrap();
            assert_eq!(t.frame, 40 + extra);
        }
    }

    #[test]
    fn chunk_round_trip() {
        let (seq, kp, mut cfg) = setup();
        cfg.noise = NoiseModel {
            sigma: 0.01,
            faults: vec![Fault {
                start: 50,
                end: None,
                kind: FaultKind::ObjectOffset(Vec3::new(0.6, 0.0, 0.0)),
            }],
        };
        let log = oracle_rollout(&seq, &kp, &cfg, 4).unwrap();
        let bytes = Container::new(vec![log.to_chunk()]).to_binary();
        let back = RolloutLog::from_chunk(
            Container::from_binary(&bytes)
                .unwrap()
                .chunk("rollout")
                .unwrap(),
        )
        .unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn filter_keeps_successful_rollouts() {
        let (seq, kp, mut cfg) = setup();
        let spec = WindowSpec {
            epsilon: 0.05,
            weights: JointWeights::default_for(seq.skeleton()),
            window_key_count: 8,
            stride: 4,
        };
        let good = oracle_rollout(&seq, &kp, &cfg, 0).unwrap();
        cfg.noise = NoiseModel::scripted(vec![Fault {
            start: 10,
            end: None,
            kind: FaultKind::ObjectOffset(Vec3::new(0.6, 0.0, 0.0)),
        }]);
        let bad = oracle_rollout(&seq, &kp, &cfg, 0).unwrap();
        let crit = SuccessCriteria::default();
        assert!(
            filter_successful_rollouts(&[bad.clone()], &crit, &spec, Exec::Sequential)
                .unwrap()
                .is_empty()
        );
        let wins =
            filter_successful_rollouts(&[bad, good], &crit, &spec, Exec::Sequential).unwrap();
        let keys = extract_key_actions(&seq, spec.epsilon, &spec.weights).unwrap();
        let direct = build_training_windows(&seq, &keys, 8, 4).unwrap();
        assert_eq!(wins.len(), direct.len());
        for (a, b) in wins.iter().zip(&direct) {
            a.validate().unwrap();
            assert_eq!(
                a.keys.iter().map(|k| k.frame).collect::<Vec<_>>(),
                b.keys.iter().map(|k| k.frame).collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn target_boundary_is_closed() {
        let crit = SuccessCriteria::default();
        let t = Vec3::zeros();
        assert!(crit.reaches_target(&Vec3::new(0.5, 0.0, 0.0), &t));
        assert!(!crit.reaches_target(&Vec3::new(0.5 + 1e-12, 0.0, 0.0), &t));
        assert!(!crit.reaches_target(&Vec3::new(0.6, 0.0, 0.0), &t));
    }
}
