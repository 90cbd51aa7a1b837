use std::sync::Arc;

use crate::format::{read_skeleton, record_width, write_skeleton, Chunk, FrameRecord};
use crate::motion::{HoiSequence, ObjectPose, PoseFrame, SkeletonSpec, CONTACT_CHANNELS};
use crate::{Error, Result};

use super::KeyActionSet;

/// One state inside a training window.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowEntry {
    /// Frame index on the source timeline.
    pub frame: usize,
    pub pose: PoseFrame,
    pub object: ObjectPose,
    pub contacts: [f64; CONTACT_CHANNELS],
}

/// A dense initial state followed by a fixed number of key actions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingWindow {
    pub initial: WindowEntry,
    /// Exactly `window_key_count` entries; padded ones repeat the last real key.
    pub keys: Vec<WindowEntry>,
    pub valid: Vec<bool>,
    pub object_name: String,
    pub prompt: String,
    pub frame_rate: f64,
    pub skeleton: Arc<SkeletonSpec>,
}

impl TrainingWindow {
    /// Frame offsets of the key entries relative to the initial state.
    pub fn offsets(&self) -> Vec<f64> {
        self.keys
            .iter()
            .map(|k| k.frame as f64 - self.initial.frame as f64)
            .collect()
    }

    pub fn window_key_count(&self) -> usize {
        self.keys.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.keys.is_empty() || self.valid.len() != self.keys.len() {
            return Err(Error::shape(
                "window needs at least one key and one validity flag per key",
            ));
        }
        if !self.valid[0] {
            return Err(Error::invalid("first key of a window must be valid"));
        }
        let mut prev = self.initial.frame;
        let mut padding = false;
        for (k, &v) in self.keys.iter().zip(&self.valid) {
            if padding && v {
                return Err(Error::invalid("valid key after padding"));
            }
            if v && k.frame <= prev {
                return Err(Error::invalid(
                    "window keys must be in strictly increasing temporal order",
                ));
            }
            if v {
                prev = k.frame;
            }
            padding |= !v;
        }
        let j = self.skeleton.joint_count();
        for e in std::iter::once(&self.initial).chain(&self.keys) {
            if e.pose.joint_rot6d.len() != j {
                return Err(Error::shape(format!(
                    "window entry has {} joints, skeleton {j}",
                    e.pose.joint_rot6d.len()
                )));
            }
        }
        Ok(())
    }
}

/// Slides over the key set: window `s` starts from the dense state at key `s`
/// and holds keys `s+1 ..= s+window_key_count`. Windows advance by `stride`
/// keys; the first window that runs past the last key is padded and ends the
/// sweep.
pub fn build_training_windows(
    seq: &HoiSequence,
    keys: &KeyActionSet,
    window_key_count: usize,
    stride: usize,
) -> Result<Vec<TrainingWindow>> {
    keys.validate()?;
    if window_key_count == 0 || stride == 0 {
        return Err(Error::invalid(
            "window_key_count and stride must be at least 1",
        ));
    }
    if keys.source_length != seq.len() {
        return Err(Error::shape(format!(
            "key set covers {} frames, sequence has {}",
            keys.source_length,
            seq.len()
        )));
    }
    let entry = |t: usize| WindowEntry {
        frame: t,
        pose: seq.motion.frames[t].clone(),
        object: seq.object.poses[t],
        contacts: seq.contacts.frames[t],
    };
    let n = keys.len();
    let mut out = Vec::new();
    let mut s = 0;
    while s + 1 < n {
        let mut entries = Vec::with_capacity(window_key_count);
        let mut valid = Vec::with_capacity(window_key_count);
        for i in 1..=window_key_count {
            let k = (s + i).min(n - 1);
            entries.push(entry(keys.indices[k]));
            valid.push(s + i < n);
        }
        let padded = valid.contains(&false);
        out.push(TrainingWindow {
            initial: entry(keys.indices[s]),
            keys: entries,
            valid,
            object_name: seq.meta.object.clone(),
            prompt: seq.meta.prompt.clone(),
            frame_rate: seq.motion.frame_rate,
            skeleton: seq.skeleton().clone(),
        });
        if padded {
            break;
        }
        s += stride;
    }
    Ok(out)
}

const TEXT_SEP: char = '\u{1e}';

/// All windows in one `windows` chunk. Windows must share skeleton, frame
/// rate and key count.
pub fn windows_chunk(windows: &[TrainingWindow]) -> Result<Chunk> {
    let first = windows
        .first()
        .ok_or_else(|| Error::invalid("no windows to write"))?;
    let w = first.window_key_count();
    let sk = &first.skeleton;
    let j = sk.joint_count();
    for win in windows {
        win.validate()?;
        if win.window_key_count() != w || win.skeleton != *sk || win.frame_rate != first.frame_rate
        {
            return Err(Error::invalid(
                "windows in one chunk must share key count, skeleton and frame rate",
            ));
        }
        if win.object_name.contains(TEXT_SEP) || win.prompt.contains(TEXT_SEP) {
            return Err(Error::invalid("window text contains a reserved separator"));
        }
    }
    let with_positions = windows
        .iter()
        .flat_map(|win| std::iter::once(&win.initial).chain(&win.keys))
        .any(|e| e.pose.joint_positions.is_some());
    let mut frames = Vec::new();
    let mut valid = Vec::new();
    let mut records = Vec::new();
    for win in windows {
        for e in std::iter::once(&win.initial).chain(&win.keys) {
            frames.push(e.frame as i64);
            FrameRecord {
                pose: e.pose.clone(),
                object: e.object,
                contacts: e.contacts,
            }
            .write(&mut records, with_positions);
        }
        valid.extend(win.valid.iter().map(|&v| v as i64));
    }
    let join = |f: &dyn Fn(&TrainingWindow) -> &str| {
        windows
            .iter()
            .map(f)
            .collect::<Vec<_>>()
            .join(&TEXT_SEP.to_string())
    };
    let c = Chunk::new("windows")
        .int("count", windows.len() as i64)
        .int("window_key_count", w as i64)
        .float("fps", first.frame_rate)
        .int("has_positions", with_positions as i64);
    Ok(write_skeleton(c, sk)
        .ints("frames", frames)
        .ints("valid", valid)
        .text("objects", &join(&|w| w.object_name.as_str()))
        .text("prompts", &join(&|w| w.prompt.as_str()))
        .floats_rows("records", records, record_width(j, with_positions)))
}

pub fn windows_from_chunk(chunk: &Chunk) -> Result<Vec<TrainingWindow>> {
    if chunk.tag != "windows" {
        return Err(Error::format(format!(
            "expected a `windows` chunk, found `{}`",
            chunk.tag
        )));
    }
    let count = chunk.get_usize("count")?;
    let w = chunk.get_usize("window_key_count")?;
    let fps = chunk.get_float("fps")?;
    let with_positions = chunk.get_int("has_positions")? != 0;
    let skeleton = read_skeleton(chunk)?;
    let j = skeleton.joint_count();
    let frames = chunk.get_ints("frames")?;
    let valid = chunk.get_ints("valid")?;
    let width = record_width(j, with_positions);
    let records = chunk.get_floats_len("records", count * (w + 1) * width)?;
    if frames.len() != count * (w + 1) || valid.len() != count * w {
        return Err(Error::format("window index tables have the wrong size"));
    }
    let split = |s: &str| -> Vec<String> {
        if count == 0 {
            vec![]
        } else {
            s.split(TEXT_SEP).map(str::to_string).collect()
        }
    };
    let objects = split(chunk.get_text("objects")?);
    let prompts = split(chunk.get_text("prompts")?);
    if objects.len() != count || prompts.len() != count {
        return Err(Error::format("window text tables have the wrong size"));
    }
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut entries = (0..=w).map(|e| {
            let idx = i * (w + 1) + e;
            let r = FrameRecord::read(&records[idx * width..(idx + 1) * width], j, with_positions);
            let frame =
                usize::try_from(frames[idx]).map_err(|_| Error::format("negative window frame"))?;
            Ok(WindowEntry {
                frame,
                pose: r.pose,
                object: r.object,
                contacts: r.contacts,
            })
        });
        let initial = entries.next().unwrap()?;
        let keys = entries.collect::<Result<Vec<_>>>()?;
        let win = TrainingWindow {
            initial,
            keys,
            valid: valid[i * w..(i + 1) * w].iter().map(|&v| v != 0).collect(),
            object_name: objects[i].clone(),
            prompt: prompts[i].clone(),
            frame_rate: fps,
            skeleton: skeleton.clone(),
        };
        win.validate()?;
        out.push(win);
    }
    Ok(out)
}
