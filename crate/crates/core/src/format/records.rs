//! Skeleton tables and per-frame records shared by the typed chunks.

use std::path::Path;
use std::sync::Arc;

use super::{Chunk, Container};
use crate::motion::{
    ContactChannels, HoiSequence, Joint, JointRole, MotionSequence, ObjectPose, ObjectTrajectory,
    PoseFrame, SequenceMeta, SkeletonSpec, Vec3, CONTACT_CHANNELS, OBJECT_DIM,
};
use crate::{Error, Result};

pub(crate) fn write_skeleton(chunk: Chunk, sk: &SkeletonSpec) -> Chunk {
    let joints = sk.joints();
    chunk
        .int("J", joints.len() as i64)
        .ints(
            "parents",
            joints
                .iter()
                .map(|j| j.parent.map_or(-1, |p| p as i64))
                .collect(),
        )
        .floats_rows(
            "offsets",
            joints
                .iter()
                .flat_map(|j| [j.offset.x, j.offset.y, j.offset.z])
                .collect(),
            3,
        )
        .text(
            "joint_names",
            &joints
                .iter()
                .map(|j| j.name.as_str())
                .collect::<Vec<_>>()
                .join(","),
        )
        .text(
            "joint_roles",
            &joints
                .iter()
                .map(|j| j.role.as_str())
                .collect::<Vec<_>>()
                .join(","),
        )
        .ints("key_joints", joints.iter().map(|j| j.key as i64).collect())
}

pub(crate) fn read_skeleton(chunk: &Chunk) -> Result<Arc<SkeletonSpec>> {
    let j = chunk.get_usize("J")?;
    let parents = chunk.get_ints("parents")?;
    let offsets = chunk.get_floats_len("offsets", 3 * j)?;
    let names: Vec<&str> = chunk.get_text("joint_names")?.split(',').collect();
    let roles: Vec<&str> = chunk.get_text("joint_roles")?.split(',').collect();
    let keys = chunk.get_ints("key_joints")?;
    if parents.len() != j || names.len() != j || roles.len() != j || keys.len() != j {
        return Err(Error::format(format!(
            "skeleton table does not describe {j} joints"
        )));
    }
    let joints = (0..j)
        .map(|i| {
            let parent = match parents[i] {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                p => return Err(Error::format(format!("bad parent index {p}"))),
            };
            let role = JointRole::parse(roles[i])
                .ok_or_else(|| Error::format(format!("unknown joint role {:?}", roles[i])))?;
            Ok(Joint {
                name: names[i].to_string(),
                parent,
                offset: Vec3::new(offsets[3 * i], offsets[3 * i + 1], offsets[3 * i + 2]),
                role,
                key: keys[i] != 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(SkeletonSpec::new(joints)?))
}

/// Width of one frame record.
pub(crate) fn record_width(joint_count: usize, with_positions: bool) -> usize {
    3 + 6 * joint_count
        + if with_positions { 3 * joint_count } else { 0 }
        + OBJECT_DIM
        + CONTACT_CHANNELS
}

/// One frame in fixed field order: root translation, 6-DOF rotations,
/// optional joint positions, object pose, contacts.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct FrameRecord {
    pub pose: PoseFrame,
    pub object: ObjectPose,
    pub contacts: [f64; CONTACT_CHANNELS],
}

impl FrameRecord {
    pub fn write(&self, out: &mut Vec<f64>, with_positions: bool) {
        out.extend_from_slice(self.pose.root_translation.as_slice());
        for r in &self.pose.joint_rot6d {
            out.extend_from_slice(r);
        }
        if with_positions {
            let j = self.pose.joint_rot6d.len();
            match &self.pose.joint_positions {
                Some(p) => p.iter().for_each(|v| out.extend_from_slice(v.as_slice())),
                None => out.extend(std::iter::repeat_n(0.0, 3 * j)),
            }
        }
        out.extend_from_slice(&self.object.flatten());
        out.extend_from_slice(&self.contacts);
    }

    pub fn read(v: &[f64], joint_count: usize, with_positions: bool) -> Self {
        let mut o = 0;
        let root = Vec3::new(v[0], v[1], v[2]);
        o += 3;
        let joint_rot6d = (0..joint_count)
            .map(|k| {
                let s = &v[o + 6 * k..o + 6 * k + 6];
                [s[0], s[1], s[2], s[3], s[4], s[5]]
            })
            .collect();
        o += 6 * joint_count;
        let joint_positions = with_positions.then(|| {
            let p = (0..joint_count)
                .map(|k| Vec3::new(v[o + 3 * k], v[o + 3 * k + 1], v[o + 3 * k + 2]))
                .collect();
            o += 3 * joint_count;
            p
        });
        let object = ObjectPose::unflatten(&v[o..o + OBJECT_DIM]);
        o += OBJECT_DIM;
        let contacts = [v[o], v[o + 1], v[o + 2], v[o + 3]];
        Self {
            pose: PoseFrame {
                root_translation: root,
                joint_rot6d,
                joint_positions,
            },
            object,
            contacts,
        }
    }
}

pub(crate) fn write_meta(chunk: Chunk, meta: &SequenceMeta) -> Chunk {
    chunk
        .text("name", &meta.name)
        .text("object", &meta.object)
        .text("prompt", &meta.prompt)
        .floats_rows(
            "waypoints",
            meta.waypoints
                .iter()
                .flat_map(|(f, xy)| [*f as f64, xy[0], xy[1]])
                .collect(),
            3,
        )
        .floats(
            "target",
            meta.target.map(|t| vec![t.x, t.y, t.z]).unwrap_or_default(),
        )
}

pub(crate) fn read_meta(chunk: &Chunk) -> Result<SequenceMeta> {
    let wp = chunk.get_floats("waypoints")?;
    if wp.len() % 3 != 0 {
        return Err(Error::format("waypoints field is not a multiple of 3"));
    }
    let waypoints = wp
        .chunks_exact(3)
        .map(|c| {
            if c[0] < 0.0 || c[0].fract() != 0.0 {
                return Err(Error::format(format!("bad waypoint frame {}", c[0])));
            }
            Ok((c[0] as usize, [c[1], c[2]]))
        })
        .collect::<Result<_>>()?;
    let target = match chunk.get_floats("target")? {
        [] => None,
        [x, y, z] => Some(Vec3::new(*x, *y, *z)),
        _ => return Err(Error::format("target must have 0 or 3 values")),
    };
    Ok(SequenceMeta {
        name: chunk.get_text("name")?.to_string(),
        object: chunk.get_text("object")?.to_string(),
        prompt: chunk.get_text("prompt")?.to_string(),
        waypoints,
        target,
    })
}

/// `motion` chunk for a full HOI sequence.
pub fn sequence_chunk(seq: &HoiSequence) -> Chunk {
    let m = &seq.motion;
    let with_positions = m.frames.iter().any(|f| f.joint_positions.is_some());
    let j = m.skeleton.joint_count();
    let mut data = Vec::with_capacity(m.len() * record_width(j, with_positions));
    for t in 0..m.len() {
        FrameRecord {
            pose: m.frames[t].clone(),
            object: seq.object.poses[t],
            contacts: seq.contacts.frames[t],
        }
        .write(&mut data, with_positions);
    }
    let c = Chunk::new("motion")
        .int("T", m.len() as i64)
        .float("fps", m.frame_rate);
    let c = write_skeleton(c, &m.skeleton).int("has_positions", with_positions as i64);
    let c = write_meta(c, &seq.meta);
    c.floats_rows("frames", data, record_width(j, with_positions))
}

pub fn sequence_from_chunk(chunk: &Chunk) -> Result<HoiSequence> {
    if chunk.tag != "motion" {
        return Err(Error::format(format!(
            "expected a `motion` chunk, found `{}`",
            chunk.tag
        )));
    }
    let t = chunk.get_usize("T")?;
    let fps = chunk.get_float("fps")?;
    let skeleton = read_skeleton(chunk)?;
    let with_positions = chunk.get_int("has_positions")? != 0;
    let j = skeleton.joint_count();
    let w = record_width(j, with_positions);
    let data = chunk.get_floats_len("frames", t * w)?;
    let mut frames = Vec::with_capacity(t);
    let mut poses = Vec::with_capacity(t);
    let mut contacts = Vec::with_capacity(t);
    for row in data.chunks_exact(w) {
        let r = FrameRecord::read(row, j, with_positions);
        frames.push(r.pose);
        poses.push(r.object);
        contacts.push(r.contacts);
    }
    HoiSequence::new(
        MotionSequence::new(frames, fps, skeleton)?,
        ObjectTrajectory {
            poses,
            frame_rate: fps,
        },
        ContactChannels { frames: contacts },
        read_meta(chunk)?,
    )
}

pub fn write_sequence(seq: &HoiSequence, path: &Path) -> Result<()> {
    Container::new(vec![sequence_chunk(seq)]).write_file(path)
}

pub fn read_sequence(path: &Path) -> Result<HoiSequence> {
    let c = Container::read_file(path)?;
    sequence_from_chunk(c.chunk("motion")?)
}
