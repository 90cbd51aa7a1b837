//! Canonical motion data types shared by every other module.
//!
//! A human pose frame stores the root translation plus one 6-DOF rotation per
//! joint (local to the parent), so the flattened pose dimension is
//! `D = 3 + 6·J`, or `3 + 9·J` when joint positions are carried as well.

mod kinematics;
pub mod rotation;

use std::sync::Arc;

pub use kinematics::{finite_difference_velocities, global_to_relative, relative_to_global};
pub(crate) use kinematics::{forward_frame, rigid_velocities};
pub use rotation::{
    check_rotation, matrix_to_rot6d, rot6d_to_matrix, rotation_difference, ROTATION_TOL,
};

use crate::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Number of contact channels: left hand, right hand, left foot, right foot.
pub const CONTACT_CHANNELS: usize = 4;

/// Width of a flattened object pose: position (3) + row-major rotation (9).
pub const OBJECT_DIM: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JointRole {
    Root,
    LeftHand,
    RightHand,
    LeftFoot,
    RightFoot,
    Head,
    Body,
}

impl JointRole {
    pub fn as_str(self) -> &'static str {
        match self {
            JointRole::Root => "root",
            JointRole::LeftHand => "left_hand",
            JointRole::RightHand => "right_hand",
            JointRole::LeftFoot => "left_foot",
            JointRole::RightFoot => "right_foot",
            JointRole::Head => "head",
            JointRole::Body => "body",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "root" => JointRole::Root,
            "left_hand" => JointRole::LeftHand,
            "right_hand" => JointRole::RightHand,
            "left_foot" => JointRole::LeftFoot,
            "right_foot" => JointRole::RightFoot,
            "head" => JointRole::Head,
            "body" => JointRole::Body,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Rest-pose offset from the parent joint, in the parent frame (meters).
    pub offset: Vec3,
    pub role: JointRole,
    /// Tracked by the policy rewards and termination checks.
    pub key: bool,
}

/// A topologically sorted kinematic tree.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSpec {
    joints: Vec<Joint>,
    end_effectors: [usize; CONTACT_CHANNELS],
}

impl SkeletonSpec {
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("skeleton has no joints"));
        }
        let mut roots = 0;
        for (j, joint) in joints.iter().enumerate() {
            match joint.parent {
                None => roots += 1,
                Some(p) if p >= j => {
                    return Err(Error::invalid(format!(
                        "joint {j} ({}) has parent {p}; parents must precede children",
                        joint.name
                    )))
                }
                Some(_) => {}
            }
            if !joint.offset.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("joint {j} has a non-finite offset")));
            }
        }
        if roots != 1 || joints[0].parent.is_some() {
            return Err(Error::invalid(
                "skeleton must have exactly one root at index 0",
            ));
        }
        let find = |role: JointRole| -> Result<usize> {
            let hits: Vec<usize> = joints
                .iter()
                .enumerate()
                .filter(|(_, j)| j.role == role)
                .map(|(i, _)| i)
                .collect();
            match hits.as_slice() {
                [one] => Ok(*one),
                _ => Err(Error::invalid(format!(
                    "role {} must be assigned to exactly one joint (found {})",
                    role.as_str(),
                    hits.len()
                ))),
            }
        };
        if find(JointRole::Root)? != 0 {
            return Err(Error::invalid("the root role must belong to joint 0"));
        }
        let end_effectors = [
            find(JointRole::LeftHand)?,
            find(JointRole::RightHand)?,
            find(JointRole::LeftFoot)?,
            find(JointRole::RightFoot)?,
        ];
        Ok(Self {
            joints,
            end_effectors,
        })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn parent(&self, j: usize) -> Option<usize> {
        self.joints[j].parent
    }

    pub fn offset(&self, j: usize) -> Vec3 {
        self.joints[j].offset
    }

    /// End-effector joints in contact-channel order.
    pub fn end_effectors(&self) -> [usize; CONTACT_CHANNELS] {
        self.end_effectors
    }

    pub fn hands(&self) -> [usize; 2] {
        [self.end_effectors[0], self.end_effectors[1]]
    }

    pub fn feet(&self) -> [usize; 2] {
        [self.end_effectors[2], self.end_effectors[3]]
    }

    pub fn key_joints(&self) -> Vec<usize> {
        self.joints
            .iter()
            .enumerate()
            .filter(|(_, j)| j.key)
            .map(|(i, _)| i)
            .collect()
    }

    /// Flattened pose width `3 + 6J` (+ `3J` with joint positions).
    pub fn pose_dim(&self, with_positions: bool) -> usize {
        let j = self.joint_count();
        3 + 6 * j + if with_positions { 3 * j } else { 0 }
    }

    /// A chain of `n` joints along +x with the given link length; joint 0 is
    /// the root and the last joint carries every end-effector role it can.
    /// Mainly useful for tests that need small arbitrary skeletons.
    pub fn chain(n: usize, link: f64) -> Result<Self> {
        if n < 5 {
            return Err(Error::invalid(
                "chain skeleton needs at least 5 joints to host roles",
            ));
        }
        let roles = [
            JointRole::LeftHand,
            JointRole::RightHand,
            JointRole::LeftFoot,
            JointRole::RightFoot,
        ];
        let joints = (0..n)
            .map(|j| {
                let role = if j == 0 {
                    JointRole::Root
                } else if j + 4 >= n {
                    roles[j + 4 - n]
                } else {
                    JointRole::Body
                };
                Joint {
                    name: format!("j{j}"),
                    parent: if j == 0 { None } else { Some(j - 1) },
                    offset: if j == 0 {
                        Vec3::zeros()
                    } else {
                        Vec3::new(link, 0.0, 0.0)
                    },
                    role,
                    key: j == 0 || role != JointRole::Body,
                }
            })
            .collect();
        Self::new(joints)
    }
}

/// One human pose: root translation plus a local 6-DOF rotation per joint.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseFrame {
    pub root_translation: Vec3,
    pub joint_rot6d: Vec<[f64; 6]>,
    pub joint_positions: Option<Vec<Vec3>>,
}

impl PoseFrame {
    pub fn rest(joint_count: usize) -> Self {
        Self {
            root_translation: Vec3::zeros(),
            joint_rot6d: vec![[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]; joint_count],
            joint_positions: None,
        }
    }

    pub fn local_rotations(&self) -> Result<Vec<Mat3>> {
        self.joint_rot6d.iter().map(rot6d_to_matrix).collect()
    }

    /// Flattened `[root(3), rot6d(6J)]`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 + 6 * self.joint_rot6d.len());
        v.extend_from_slice(self.root_translation.as_slice());
        for r in &self.joint_rot6d {
            v.extend_from_slice(r);
        }
        v
    }

    pub fn unflatten(values: &[f64], joint_count: usize) -> Result<Self> {
        if values.len() != 3 + 6 * joint_count {
            return Err(Error::shape(format!(
                "pose vector has {} values, expected {}",
                values.len(),
                3 + 6 * joint_count
            )));
        }
        let joint_rot6d = values[3..]
            .chunks_exact(6)
            .map(|c| [c[0], c[1], c[2], c[3], c[4], c[5]])
            .collect();
        Ok(Self {
            root_translation: Vec3::new(values[0], values[1], values[2]),
            joint_rot6d,
            joint_positions: None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    pub frames: Vec<PoseFrame>,
    pub frame_rate: f64,
    pub skeleton: Arc<SkeletonSpec>,
}

impl MotionSequence {
    pub fn new(
        frames: Vec<PoseFrame>,
        frame_rate: f64,
        skeleton: Arc<SkeletonSpec>,
    ) -> Result<Self> {
        let m = Self {
            frames,
            frame_rate,
            skeleton,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.len() < 2 {
            return Err(Error::invalid(format!(
                "motion needs T >= 2 frames, got {}",
                self.frames.len()
            )));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::invalid(format!(
                "invalid frame rate {}",
                self.frame_rate
            )));
        }
        let j = self.skeleton.joint_count();
        for (t, f) in self.frames.iter().enumerate() {
            if f.joint_rot6d.len() != j {
                return Err(Error::shape(format!(
                    "frame {t} has {} joint rotations, skeleton has {j} joints",
                    f.joint_rot6d.len()
                )));
            }
            if let Some(p) = &f.joint_positions {
                if p.len() != j {
                    return Err(Error::shape(format!(
                        "frame {t} has {} joint positions",
                        p.len()
                    )));
                }
            }
            if !f.root_translation.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("root translation at frame {t}")));
            }
            for r in &f.joint_rot6d {
                rot6d_to_matrix(r).map_err(|e| Error::invalid(format!("frame {t}: {e}")))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectPose {
    pub position: Vec3,
    pub rotation: Mat3,
}

impl ObjectPose {
    pub fn new(position: Vec3, rotation: Mat3) -> Self {
        Self { position, rotation }
    }

    pub fn identity_at(position: Vec3) -> Self {
        Self {
            position,
            rotation: Mat3::identity(),
        }
    }

    /// `[position(3), rotation row-major(9)]`.
    pub fn flatten(&self) -> [f64; OBJECT_DIM] {
        let mut out = [0.0; OBJECT_DIM];
        out[..3].copy_from_slice(self.position.as_slice());
        for r in 0..3 {
            for c in 0..3 {
                out[3 + 3 * r + c] = self.rotation[(r, c)];
            }
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten); the rotation block is taken as is.
    pub fn unflatten(v: &[f64]) -> Self {
        let position = Vec3::new(v[0], v[1], v[2]);
        let rotation = Mat3::new(v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11]);
        Self { position, rotation }
    }

    /// Maps a point from the object's canonical frame to the world frame.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.position
    }

    /// Maps a world point into the object's canonical frame.
    pub fn inverse_transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.position)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectTrajectory {
    pub poses: Vec<ObjectPose>,
    pub frame_rate: f64,
}

impl ObjectTrajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (t, p) in self.poses.iter().enumerate() {
            if !p.position.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("object position at frame {t}")));
            }
            check_rotation(&p.rotation, ROTATION_TOL)
                .map_err(|e| Error::invalid(format!("object frame {t}: {e}")))?;
        }
        Ok(())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.poses.iter().map(|p| p.position).collect()
    }

    pub fn rotations(&self) -> Vec<Mat3> {
        self.poses.iter().map(|p| p.rotation).collect()
    }
}

/// Per-frame contact probabilities (left hand, right hand, left foot, right foot).
#[derive(Clone, Debug, PartialEq)]
pub struct ContactChannels {
    pub frames: Vec<[f64; CONTACT_CHANNELS]>,
}

impl ContactChannels {
    pub fn zeros(len: usize) -> Self {
        Self {
            frames: vec![[0.0; CONTACT_CHANNELS]; len],
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for (t, c) in self.frames.iter().enumerate() {
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid(format!(
                    "contact probabilities out of [0,1] at frame {t}: {c:?}"
                )));
            }
        }
        Ok(())
    }

    /// Binary view: a channel is in contact when its probability is >= 0.5.
    pub fn binary(&self) -> Vec<[bool; CONTACT_CHANNELS]> {
        self.frames.iter().map(|c| c.map(|v| v >= 0.5)).collect()
    }
}

/// Global per-link state: positions, orientations and kinematic velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalMotion {
    pub positions: Vec<Vec<Vec3>>,
    pub orientations: Vec<Vec<Mat3>>,
    pub linear_velocity: Vec<Vec<Vec3>>,
    pub angular_velocity: Vec<Vec<Vec3>>,
    pub frame_rate: f64,
    pub skeleton: Arc<SkeletonSpec>,
}

impl GlobalMotion {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Free-form annotations carried alongside a sequence.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SequenceMeta {
    pub name: String,
    pub object: String,
    pub prompt: String,
    /// `(frame, [x, y])` object waypoints, sorted by frame.
    pub waypoints: Vec<(usize, [f64; 2])>,
    pub target: Option<Vec3>,
}

/// A human motion bundled with its object trajectory and contact labels.
#[derive(Clone, Debug, PartialEq)]
pub struct HoiSequence {
    pub motion: MotionSequence,
    pub object: ObjectTrajectory,
    pub contacts: ContactChannels,
    pub meta: SequenceMeta,
}

impl HoiSequence {
    pub fn new(
        motion: MotionSequence,
        object: ObjectTrajectory,
        contacts: ContactChannels,
        meta: SequenceMeta,
    ) -> Result<Self> {
        let s = Self {
            motion,
            object,
            contacts,
            meta,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.motion.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motion.is_empty()
    }

    pub fn skeleton(&self) -> &Arc<SkeletonSpec> {
        &self.motion.skeleton
    }

    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        self.object.validate()?;
        self.contacts.validate()?;
        let t = self.motion.len();
        if self.object.len() != t || self.contacts.len() != t {
            return Err(Error::shape(format!(
                "length mismatch: motion {t}, object {}, contacts {}",
                self.object.len(),
                self.contacts.len()
            )));
        }
        for w in self.meta.waypoints.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::invalid("waypoints must be strictly sorted by frame"));
            }
        }
        if let Some((f, _)) = self.meta.waypoints.last() {
            if *f >= t {
                return Err(Error::invalid(format!(
                    "waypoint frame {f} beyond sequence length {t}"
                )));
            }
        }
        Ok(())
    }
}
