//! Key-action extraction and interpolation.
//!
//! A dense HOI sequence is summarized by a sparse set of key frames such that
//! interpolating between them reproduces every tracked point within a weighted
//! minimax error bound. Tracked points are the global joint positions plus the
//! object center and four non-coplanar markers rigidly attached to the object,
//! so object rotation errors are visible to the same metric.

mod extract;
mod interp;
mod oracle;
mod windows;

use std::sync::Arc;

pub use extract::{extract_key_actions, DEFAULT_EPSILON};
pub use interp::{interpolate, reconstruction_error, tracked_points, ReconstructionReport};
pub use oracle::{optimal_key_actions_oracle, ORACLE_MAX_FRAMES};
pub use windows::{
    build_training_windows, windows_chunk, windows_from_chunk, TrainingWindow, WindowEntry,
};

use crate::format::{read_skeleton, record_width, write_skeleton, Chunk, FrameRecord};
use crate::motion::{
    HoiSequence, JointRole, ObjectPose, PoseFrame, SequenceMeta, SkeletonSpec, Vec3,
    CONTACT_CHANNELS,
};
use crate::{Error, Result};

/// Number of object points tracked besides the joints: center + 4 markers.
pub const OBJECT_POINTS: usize = 5;

/// Per-joint importance weights plus one weight shared by the object points.
#[derive(Clone, Debug, PartialEq)]
pub struct JointWeights {
    pub joints: Vec<f64>,
    pub object: f64,
}

impl JointWeights {
    pub fn new(joints: Vec<f64>, object: f64) -> Result<Self> {
        let w = Self { joints, object };
        w.validate()?;
        Ok(w)
    }

    /// 1.0 for body joints, 2.0 for hands and feet, 1.0 for the object.
    pub fn default_for(skeleton: &SkeletonSpec) -> Self {
        let joints = skeleton
            .joints()
            .iter()
            .map(|j| match j.role {
                JointRole::LeftHand
                | JointRole::RightHand
                | JointRole::LeftFoot
                | JointRole::RightFoot => 2.0,
                _ => 1.0,
            })
            .collect();
        Self {
            joints,
            object: 1.0,
        }
    }

    pub fn uniform(joint_count: usize, w: f64) -> Self {
        Self {
            joints: vec![w; joint_count],
            object: w,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .joints
            .iter()
            .chain([&self.object])
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::invalid(
                "joint weights must be finite and non-negative",
            ));
        }
        if self.joints.iter().chain([&self.object]).all(|w| *w == 0.0) {
            return Err(Error::invalid("at least one joint weight must be positive"));
        }
        Ok(())
    }

    /// Weight of tracked point `k` (joints first, then object points).
    pub(crate) fn point_weight(&self, k: usize) -> f64 {
        self.joints.get(k).copied().unwrap_or(self.object)
    }
}

/// Object markers in the object's canonical frame: a regular tetrahedron.
pub fn object_markers(scale: f64) -> [Vec3; 4] {
    [
        Vec3::new(scale, scale, scale),
        Vec3::new(scale, -scale, -scale),
        Vec3::new(-scale, scale, -scale),
        Vec3::new(-scale, -scale, scale),
    ]
}

/// Default marker half-size (meters).
pub const MARKER_SCALE: f64 = 0.1;

/// Pose, object pose and contacts at one key frame.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyFrame {
    pub pose: PoseFrame,
    pub object: ObjectPose,
    pub contacts: [f64; CONTACT_CHANNELS],
}

impl KeyFrame {
    pub fn from_sequence(seq: &HoiSequence, t: usize) -> Self {
        Self {
            pose: seq.motion.frames[t].clone(),
            object: seq.object.poses[t],
            contacts: seq.contacts.frames[t],
        }
    }
}

/// Sorted key indices and the frames at those indices.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyActionSet {
    pub indices: Vec<usize>,
    pub frames: Vec<KeyFrame>,
    pub source_length: usize,
    pub frame_rate: f64,
    pub skeleton: Arc<SkeletonSpec>,
    pub meta: SequenceMeta,
}

impl KeyActionSet {
    pub fn from_indices(seq: &HoiSequence, indices: Vec<usize>) -> Result<Self> {
        let frames = indices
            .iter()
            .map(|&t| {
                if t >= seq.len() {
                    return Err(Error::invalid(format!(
                        "key index {t} outside sequence of length {}",
                        seq.len()
                    )));
                }
                Ok(KeyFrame::from_sequence(seq, t))
            })
            .collect::<Result<Vec<_>>>()?;
        let k = Self {
            indices,
            frames,
            source_length: seq.len(),
            frame_rate: seq.motion.frame_rate,
            skeleton: seq.skeleton().clone(),
            meta: seq.meta.clone(),
        };
        k.validate()?;
        Ok(k)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.indices.len() < 2 {
            return Err(Error::invalid(format!(
                "key set needs at least 2 keys, has {}",
                self.indices.len()
            )));
        }
        if self.frames.len() != self.indices.len() {
            return Err(Error::shape("key frames and indices differ in length"));
        }
        if self.indices[0] != 0 || *self.indices.last().unwrap() + 1 != self.source_length {
            return Err(Error::invalid(format!(
                "key set must start at 0 and end at {} (got {:?}..{:?})",
                self.source_length.saturating_sub(1),
                self.indices.first(),
                self.indices.last()
            )));
        }
        if self.indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("key indices must be strictly increasing"));
        }
        Ok(())
    }

    pub fn to_chunk(&self) -> Chunk {
        let j = self.skeleton.joint_count();
        let with_positions = self.frames.iter().any(|f| f.pose.joint_positions.is_some());
        let mut data = Vec::with_capacity(self.len() * record_width(j, with_positions));
        for f in &self.frames {
            FrameRecord {
                pose: f.pose.clone(),
                object: f.object,
                contacts: f.contacts,
            }
            .write(&mut data, with_positions);
        }
        let c = Chunk::new("keyset")
            .int("source_length", self.source_length as i64)
            .float("fps", self.frame_rate)
            .ints("indices", self.indices.iter().map(|&i| i as i64).collect());
        let c = write_skeleton(c, &self.skeleton).int("has_positions", with_positions as i64);
        let c = crate::format::write_meta(c, &self.meta);
        c.floats_rows("frames", data, record_width(j, with_positions))
    }

    pub fn from_chunk(chunk: &Chunk) -> Result<Self> {
        if chunk.tag != "keyset" {
            return Err(Error::format(format!(
                "expected a `keyset` chunk, found `{}`",
                chunk.tag
            )));
        }
        let skeleton = read_skeleton(chunk)?;
        let with_positions = chunk.get_int("has_positions")? != 0;
        let indices: Vec<usize> = chunk
            .get_ints("indices")?
            .iter()
            .map(|&i| usize::try_from(i).map_err(|_| Error::format("negative key index")))
            .collect::<Result<_>>()?;
        let j = skeleton.joint_count();
        let w = record_width(j, with_positions);
        let data = chunk.get_floats_len("frames", indices.len() * w)?;
        let frames = data
            .chunks_exact(w)
            .map(|row| {
                let r = FrameRecord::read(row, j, with_positions);
                KeyFrame {
                    pose: r.pose,
                    object: r.object,
                    contacts: r.contacts,
                }
            })
            .collect();
        let k = Self {
            indices,
            frames,
            source_length: chunk.get_usize("source_length")?,
            frame_rate: chunk.get_float("fps")?,
            skeleton,
            meta: crate::format::read_meta(chunk)?,
        };
        k.validate()?;
        Ok(k)
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::format::Container;

    #[test]
    fn weights_validation() {
        assert!(JointWeights::new(vec![1.0, -1.0], 1.0).is_err());
        assert!(JointWeights::new(vec![0.0, 0.0], 0.0).is_err());
        assert!(JointWeights::new(vec![0.0, 0.0], 1.0).is_ok());
        let sk = SkeletonSpec::chain(6, 0.1).unwrap();
        let w = JointWeights::default_for(&sk);
        assert_eq!(w.joints, vec![1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(w.point_weight(7), 1.0);
    }

    #[test]
    fn keyset_chunk_round_trip() {
        let seq = random_sequence(3, 20, 6);
        let k = KeyActionSet::from_indices(&seq, vec![0, 4, 11, 19]).unwrap();
        let c = Container::new(vec![k.to_chunk()]);
        let back = Container::decode(&c.to_text().into_bytes()).unwrap();
        assert_eq!(
            KeyActionSet::from_chunk(back.chunk("keyset").unwrap()).unwrap(),
            k
        );
    }

    #[test]
    fn keyset_invariants() {
        let seq = random_sequence(3, 10, 5);
        assert!(KeyActionSet::from_indices(&seq, vec![0, 9]).is_ok());
        assert!(KeyActionSet::from_indices(&seq, vec![1, 9]).is_err());
        assert!(KeyActionSet::from_indices(&seq, vec![0, 8]).is_err());
        assert!(KeyActionSet::from_indices(&seq, vec![0, 5, 5, 9]).is_err());
        assert!(KeyActionSet::from_indices(&seq, vec![0, 12]).is_err());
    }
}
