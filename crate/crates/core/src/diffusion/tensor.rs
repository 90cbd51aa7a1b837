use std::ops::Range;
use std::sync::Arc;

use nalgebra::SVD;
use ndarray::{Array2, ArrayView2};

use crate::keyaction::{KeyActionSet, KeyFrame, TrainingWindow};
use crate::motion::rotation::{rot6d_to_matrix, rot6d_unchecked};
use crate::motion::{
    Mat3, ObjectPose, PoseFrame, SequenceMeta, SkeletonSpec, Vec3, CONTACT_CHANNELS, OBJECT_DIM,
};
use crate::{Error, Result};

/// Smallest standard deviation used when normalizing a feature.
pub const MIN_STD: f64 = 1e-2;

/// Per-slot feature layout: `[human D | object 12 | contacts 4 | time 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowLayout {
    pub joint_count: usize,
    /// Initial state plus key actions.
    pub slots: usize,
}

impl WindowLayout {
    pub fn new(joint_count: usize, slots: usize) -> Result<Self> {
        if joint_count == 0 || slots < 2 {
            return Err(Error::invalid(format!(
                "layout needs joints and >= 2 slots, got {joint_count}, {slots}"
            )));
        }
        Ok(Self { joint_count, slots })
    }

    pub fn for_window(win: &TrainingWindow) -> Self {
        Self {
            joint_count: win.skeleton.joint_count(),
            slots: win.keys.len() + 1,
        }
    }

    pub fn pose_dim(&self) -> usize {
        3 + 6 * self.joint_count
    }

    pub fn feature_dim(&self) -> usize {
        self.pose_dim() + OBJECT_DIM + CONTACT_CHANNELS + 1
    }

    /// Width of a masked-motion row: object pose then human pose.
    pub fn cond_dim(&self) -> usize {
        OBJECT_DIM + self.pose_dim()
    }

    pub fn human(&self) -> Range<usize> {
        0..self.pose_dim()
    }

    pub fn object(&self) -> Range<usize> {
        let d = self.pose_dim();
        d..d + OBJECT_DIM
    }

    pub fn contacts(&self) -> Range<usize> {
        let o = self.pose_dim() + OBJECT_DIM;
        o..o + CONTACT_CHANNELS
    }

    pub fn time(&self) -> usize {
        self.feature_dim() - 1
    }

    /// Feature column holding the same quantity as masked-motion column `c`.
    pub fn cond_to_feature(&self, c: usize) -> usize {
        if c < OBJECT_DIM {
            self.pose_dim() + c
        } else {
            c - OBJECT_DIM
        }
    }
}

/// Human and object pose at one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotState {
    pub pose: PoseFrame,
    pub object: ObjectPose,
}

/// Clean sample `τ_0` of one window in the canonical frame (initial object
/// position moved to the xy origin). Invalid slots hold zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTensor {
    pub values: Array2<f64>,
    pub valid: Vec<bool>,
    /// xy offset removed from every horizontal position.
    pub shift: [f64; 2],
}

pub(crate) fn write_slot(
    row: &mut [f64],
    layout: &WindowLayout,
    pose: &PoseFrame,
    object: &ObjectPose,
    contacts: &[f64; CONTACT_CHANNELS],
    time: f64,
    shift: [f64; 2],
) {
    let mut human = pose.flatten();
    human.truncate(layout.pose_dim());
    human[0] -= shift[0];
    human[1] -= shift[1];
    row[layout.human()].copy_from_slice(&human);
    let mut obj = object.flatten();
    obj[0] -= shift[0];
    obj[1] -= shift[1];
    row[layout.object()].copy_from_slice(&obj);
    row[layout.contacts()].copy_from_slice(contacts);
    row[layout.time()] = time;
}

impl SampleTensor {
    pub fn from_window(win: &TrainingWindow) -> Result<Self> {
        win.validate()?;
        let layout = WindowLayout::for_window(win);
        let shift = [win.initial.object.position.x, win.initial.object.position.y];
        let mut values = Array2::zeros((layout.slots, layout.feature_dim()));
        let mut valid = vec![true];
        let entries = std::iter::once((&win.initial, true))
            .chain(win.keys.iter().zip(win.valid.iter().copied()));
        for (s, (e, v)) in entries.enumerate() {
            if s > 0 {
                valid.push(v);
            }
            if !v {
                continue;
            }
            let time = (e.frame - win.initial.frame) as f64;
            let mut row = values.row_mut(s);
            write_slot(
                row.as_slice_mut().unwrap(),
                &layout,
                &e.pose,
                &e.object,
                &e.contacts,
                time,
                shift,
            );
        }
        Ok(Self {
            values,
            valid,
            shift,
        })
    }
}

/// Per-feature affine normalization fitted on valid training slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(samples: &[SampleTensor]) -> Result<Self> {
        let dim = samples
            .first()
            .ok_or_else(|| Error::invalid("cannot fit a normalizer on no samples"))?
            .values
            .ncols();
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut count = 0usize;
        for s in samples {
            if s.values.ncols() != dim {
                return Err(Error::shape("samples differ in feature width"));
            }
            for (row, _) in s
                .values
                .rows()
                .into_iter()
                .zip(&s.valid)
                .filter(|(_, v)| **v)
            {
                for (k, x) in row.iter().enumerate() {
                    sum[k] += x;
                    sq[k] += x * x;
                }
                count += 1;
            }
        }
        let c = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / c).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / c - m * m).max(0.0).sqrt().max(MIN_STD))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Normalizes valid rows; invalid rows become zeros.
    pub fn normalize(&self, values: ArrayView2<f64>, valid: &[bool]) -> Array2<f64> {
        let mut out = Array2::zeros(values.dim());
        for (s, row) in values.rows().into_iter().enumerate() {
            if valid[s] {
                for (k, x) in row.iter().enumerate() {
                    out[[s, k]] = (x - self.mean[k]) / self.std[k];
                }
            }
        }
        out
    }

    pub fn denormalize(&self, values: ArrayView2<f64>) -> Array2<f64> {
        let mut out = values.to_owned();
        for mut row in out.rows_mut() {
            for (k, x) in row.iter_mut().enumerate() {
                *x = *x * self.std[k] + self.mean[k];
            }
        }
        out
    }
}

/// Key actions produced by the sampler, on a timeline starting at frame 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedKeys {
    pub frames: Vec<usize>,
    pub states: Vec<SlotState>,
    /// Contact probabilities in `[0, 1]`.
    pub contacts: Vec<[f64; CONTACT_CHANNELS]>,
}

impl GeneratedKeys {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Key set whose dense interpolation spans `frames[0]..=frames[last]`.
    pub fn to_key_set(
        &self,
        skeleton: Arc<SkeletonSpec>,
        frame_rate: f64,
        meta: SequenceMeta,
    ) -> Result<KeyActionSet> {
        let start = *self
            .frames
            .first()
            .ok_or_else(|| Error::invalid("no generated keys"))?;
        let k = KeyActionSet {
            indices: self.frames.iter().map(|f| f - start).collect(),
            frames: self
                .states
                .iter()
                .zip(&self.contacts)
                .map(|(s, c)| KeyFrame {
                    pose: s.pose.clone(),
                    object: s.object,
                    contacts: *c,
                })
                .collect(),
            source_length: self.frames.last().unwrap() - start + 1,
            frame_rate,
            skeleton,
            meta,
        };
        k.validate()?;
        Ok(k)
    }
}

/// Closest rotation matrix (Frobenius sense) to an arbitrary 3×3 matrix.
pub fn nearest_rotation(m: &Mat3) -> Mat3 {
    let svd = SVD::new(*m, true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t
}

/// Turns a denormalized canonical tensor back into poses: rotations are
/// orthonormalized, contacts clamped to `[0, 1]`, times rounded and forced to
/// increase strictly from 0.
pub fn unpack(
    values: ArrayView2<f64>,
    layout: &WindowLayout,
    shift: [f64; 2],
) -> Result<GeneratedKeys> {
    if values.dim() != (layout.slots, layout.feature_dim()) {
        return Err(Error::shape(format!(
            "tensor is {:?}, layout expects ({}, {})",
            values.dim(),
            layout.slots,
            layout.feature_dim()
        )));
    }
    if let Some(bad) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!(
            "generated tensor entry {bad} is not finite"
        )));
    }
    let j = layout.joint_count;
    let mut out = GeneratedKeys {
        frames: vec![],
        states: vec![],
        contacts: vec![],
    };
    let mut prev: Option<usize> = None;
    for row in values.rows() {
        let row = row.to_vec();
        let h = &row[layout.human()];
        let joint_rot6d = (0..j)
            .map(|k| {
                let r6: [f64; 6] = h[3 + 6 * k..9 + 6 * k].try_into().unwrap();
                match rot6d_to_matrix(&r6) {
                    Ok(m) => rot6d_unchecked(&m),
                    Err(_) => {
                        log::warn!("degenerate generated rotation at joint {k}, using identity");
                        rot6d_unchecked(&Mat3::identity())
                    }
                }
            })
            .collect();
        let pose = PoseFrame {
            root_translation: Vec3::new(h[0] + shift[0], h[1] + shift[1], h[2]),
            joint_rot6d,
            joint_positions: None,
        };
        let mut object = ObjectPose::unflatten(&row[layout.object()]);
        object.position.x += shift[0];
        object.position.y += shift[1];
        object.rotation = nearest_rotation(&object.rotation);
        let c = &row[layout.contacts()];
        let contacts = [c[0], c[1], c[2], c[3]].map(|x| x.clamp(0.0, 1.0));
        let t = row[layout.time()].round().max(0.0) as usize;
        let frame = match prev {
            None => 0,
            Some(p) => t.max(p + 1),
        };
        prev = Some(frame);
        out.frames.push(frame);
        out.states.push(SlotState { pose, object });
        out.contacts.push(contacts);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::rotation::{exp_map, is_rotation, rot_z};

    #[test]
    fn layout_ranges() {
        let l = WindowLayout::new(11, 7).unwrap();
        assert_eq!(l.pose_dim(), 69);
        assert_eq!(l.feature_dim(), 86);
        assert_eq!(l.cond_dim(), 81);
        assert_eq!(l.object(), 69..81);
        assert_eq!(l.contacts(), 81..85);
        assert_eq!(l.time(), 85);
        assert_eq!(l.cond_to_feature(0), 69);
        assert_eq!(l.cond_to_feature(12), 0);
        assert!(WindowLayout::new(11, 1).is_err());
    }

    #[test]
    fn nearest_rotation_projects() {
        let r = exp_map(&Vec3::new(0.3, -1.0, 0.4));
        assert!((nearest_rotation(&r) - r).norm() < 1e-12);
        let noisy = r + Mat3::from_fn(|i, j| 0.05 * ((i * 3 + j) as f64).sin());
        assert!(is_rotation(&nearest_rotation(&noisy), 1e-9));
        assert!(is_rotation(&nearest_rotation(&(-r)), 1e-9));
    }

    #[test]
    fn normalizer_round_trip() {
        let values = ndarray::array![[1.0, 5.0], [3.0, 5.0], [100.0, 100.0]];
        let s = SampleTensor {
            values: values.clone(),
            valid: vec![true, true, false],
            shift: [0.0, 0.0],
        };
        let n = Normalizer::fit(&[s]).unwrap();
        assert_eq!(n.mean, vec![2.0, 5.0]);
        assert_eq!(n.std, vec![1.0, MIN_STD]);
        let z = n.normalize(values.view(), &[true, true, false]);
        assert_eq!(z.row(2).to_vec(), vec![0.0, 0.0]);
        let back = n.denormalize(z.view());
        assert_eq!(back.row(0).to_vec(), vec![1.0, 5.0]);
    }

    #[test]
    fn unpack_sanitizes() {
        let layout = WindowLayout::new(1, 3).unwrap();
        let mut v = Array2::zeros((3, layout.feature_dim()));
        for s in 0..3 {
            v[[s, 3]] = 2.0; // unnormalized 6-DOF columns
            v[[s, 7]] = 1.0;
            let rot = rot_z(0.5) * 1.1;
            for k in 0..9 {
                v[[s, layout.object().start + 3 + k]] = rot[(k / 3, k % 3)];
            }
            v[[s, layout.contacts().start]] = 1.7;
            v[[s, layout.contacts().start + 1]] = -0.3;
        }
        v[[0, layout.time()]] = 3.0;
        v[[1, layout.time()]] = 2.4;
        v[[2, layout.time()]] = 7.6;
        v[[1, layout.object().start]] = 0.25;
        let g = unpack(v.view(), &layout, [1.0, -2.0]).unwrap();
        assert_eq!(g.frames, vec![0, 2, 8]);
        assert_eq!(g.contacts[0], [1.0, 0.0, 0.0, 0.0]);
        assert!((g.states[1].object.position - Vec3::new(1.25, -2.0, 0.0)).norm() < 1e-12);
        assert!((g.states[0].object.rotation - rot_z(0.5)).norm() < 1e-9);
        assert_eq!(
            g.states[0].pose.joint_rot6d[0],
            [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
        v[[1, 0]] = f64::NAN;
        assert!(unpack(v.view(), &layout, [0.0, 0.0]).is_err());
    }
}
