use crate::motion::rotation::{rot6d_unchecked, slerp};
use crate::motion::{
    forward_frame, ContactChannels, HoiSequence, Mat3, MotionSequence, ObjectPose,
    ObjectTrajectory, PoseFrame, SkeletonSpec, Vec3,
};
use crate::{Error, Result};

use super::{object_markers, JointWeights, KeyActionSet, KeyFrame, MARKER_SCALE, OBJECT_POINTS};

/// Global joint positions followed by the object center and its four markers.
pub fn tracked_points(
    skeleton: &SkeletonSpec,
    pose: &PoseFrame,
    object: &ObjectPose,
) -> Result<Vec<Vec3>> {
    let local = pose.local_rotations()?;
    let (mut pts, _) = forward_frame(skeleton, &pose.root_translation, &local);
    pts.reserve(OBJECT_POINTS);
    pts.push(object.position);
    for m in object_markers(MARKER_SCALE) {
        pts.push(object.transform_point(&m));
    }
    Ok(pts)
}

/// Decoded rotations of a key frame, cached so segments can be evaluated quickly.
pub(crate) struct PreparedKey<'a> {
    pub frame: &'a KeyFrame,
    pub local: Vec<Mat3>,
}

impl<'a> PreparedKey<'a> {
    pub fn new(frame: &'a KeyFrame) -> Result<Self> {
        Ok(Self {
            local: frame.pose.local_rotations()?,
            frame,
        })
    }
}

/// Frame `t` between keys at `ia < ib`: linear for translations, geodesic for
/// rotations, zero-order hold (from the left key) for contacts.
pub(crate) fn interp_frame(
    skeleton: &SkeletonSpec,
    a: &PreparedKey,
    ia: usize,
    b: &PreparedKey,
    ib: usize,
    t: usize,
) -> KeyFrame {
    if t == ia {
        return a.frame.clone();
    }
    if t == ib {
        return b.frame.clone();
    }
    let s = (t - ia) as f64 / (ib - ia) as f64;
    let lerp = |x: &Vec3, y: &Vec3| x + (y - x) * s;
    let local: Vec<Mat3> = a
        .local
        .iter()
        .zip(&b.local)
        .map(|(ra, rb)| slerp(ra, rb, s))
        .collect();
    let root = lerp(
        &a.frame.pose.root_translation,
        &b.frame.pose.root_translation,
    );
    let joint_positions = a
        .frame
        .pose
        .joint_positions
        .as_ref()
        .map(|_| forward_frame(skeleton, &root, &local).0);
    let (oa, ob) = (&a.frame.object, &b.frame.object);
    KeyFrame {
        pose: PoseFrame {
            root_translation: root,
            joint_rot6d: local.iter().map(rot6d_unchecked).collect(),
            joint_positions,
        },
        object: ObjectPose::new(
            lerp(&oa.position, &ob.position),
            slerp(&oa.rotation, &ob.rotation, s),
        ),
        contacts: a.frame.contacts,
    }
}

/// Dense reconstruction of the full timeline from a key set.
pub fn interpolate(keys: &KeyActionSet) -> Result<HoiSequence> {
    keys.validate()?;
    let sk = &keys.skeleton;
    let prepared = keys
        .frames
        .iter()
        .map(PreparedKey::new)
        .collect::<Result<Vec<_>>>()?;
    let n = keys.source_length;
    let mut frames = Vec::with_capacity(n);
    let mut poses = Vec::with_capacity(n);
    let mut contacts = Vec::with_capacity(n);
    for (seg, w) in keys.indices.windows(2).enumerate() {
        let last = seg + 2 == keys.indices.len();
        let end = if last { w[1] + 1 } else { w[1] };
        for t in w[0]..end {
            let f = interp_frame(sk, &prepared[seg], w[0], &prepared[seg + 1], w[1], t);
            frames.push(f.pose);
            poses.push(f.object);
            contacts.push(f.contacts);
        }
    }
    HoiSequence::new(
        MotionSequence::new(frames, keys.frame_rate, sk.clone())?,
        ObjectTrajectory {
            poses,
            frame_rate: keys.frame_rate,
        },
        ContactChannels { frames: contacts },
        keys.meta.clone(),
    )
}

/// Weighted per-frame reconstruction error summary.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionReport {
    pub max_error: f64,
    pub argmax_frame: usize,
    /// Index into the tracked points: joints first, then the object points.
    pub argmax_point: usize,
    /// `max_k w_k‖p_k − p̂_k‖` per frame.
    pub frame_errors: Vec<f64>,
}

impl ReconstructionReport {
    /// Maximum error inside each segment between consecutive key indices,
    /// endpoints included.
    pub fn segment_errors(&self, indices: &[usize]) -> Vec<f64> {
        indices
            .windows(2)
            .map(|w| {
                self.frame_errors[w[0]..=w[1]]
                    .iter()
                    .copied()
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

/// Weighted error of one frame and the offending point (smallest index on ties).
pub(crate) fn frame_error(
    reference: &[Vec3],
    recon: &[Vec3],
    weights: &JointWeights,
) -> (f64, usize) {
    let mut best = (0.0, 0);
    for (k, (p, q)) in reference.iter().zip(recon).enumerate() {
        let e = weights.point_weight(k) * (p - q).norm();
        if e > best.0 {
            best = (e, k);
        }
    }
    best
}

/// Compares a reconstruction against its reference sequence.
pub fn reconstruction_error(
    reference: &HoiSequence,
    reconstruction: &HoiSequence,
    weights: &JointWeights,
) -> Result<ReconstructionReport> {
    let sk = reference.skeleton();
    if reconstruction.len() != reference.len() {
        return Err(Error::shape(format!(
            "reconstruction has {} frames, reference {}",
            reconstruction.len(),
            reference.len()
        )));
    }
    if reconstruction.skeleton().joint_count() != sk.joint_count()
        || weights.joints.len() != sk.joint_count()
    {
        return Err(Error::shape(
            "joint counts of reference, reconstruction and weights must match",
        ));
    }
    weights.validate()?;
    let mut report = ReconstructionReport {
        max_error: 0.0,
        argmax_frame: 0,
        argmax_point: 0,
        frame_errors: vec![],
    };
    for t in 0..reference.len() {
        let p = tracked_points(sk, &reference.motion.frames[t], &reference.object.poses[t])?;
        let q = tracked_points(
            reconstruction.skeleton(),
            &reconstruction.motion.frames[t],
            &reconstruction.object.poses[t],
        )?;
        let (e, k) = frame_error(&p, &q, weights);
        if e > report.max_error {
            report.max_error = e;
            report.argmax_frame = t;
            report.argmax_point = k;
        }
        report.frame_errors.push(e);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::*;
    use crate::motion::rotation::{geodesic_distance, rot6d_to_matrix, rot_z};
    use crate::motion::SkeletonSpec;

    #[test]
    fn key_frames_reproduced_exactly() {
        let seq = random_sequence(11, 25, 6);
        let keys = KeyActionSet::from_indices(&seq, vec![0, 3, 10, 24]).unwrap();
        let dense = interpolate(&keys).unwrap();
        assert_eq!(dense.len(), 25);
        for &i in &keys.indices {
            assert_eq!(dense.motion.frames[i], seq.motion.frames[i]);
            assert_eq!(dense.object.poses[i], seq.object.poses[i]);
            assert_eq!(dense.contacts.frames[i], seq.contacts.frames[i]);
        }
    }

    #[test]
    fn midpoint_is_linear_and_geodesic() {
        let seq = random_sequence(5, 9, 5);
        let keys = KeyActionSet::from_indices(&seq, vec![0, 8]).unwrap();
        let dense = interpolate(&keys).unwrap();
        let (a, b) = (&seq.motion.frames[0], &seq.motion.frames[8]);
        let mid = &dense.motion.frames[4];
        assert!(
            (mid.root_translation - (a.root_translation + b.root_translation) / 2.0).norm() < 1e-12
        );
        for j in 0..5 {
            let ra = rot6d_to_matrix(&a.joint_rot6d[j]).unwrap();
            let rb = rot6d_to_matrix(&b.joint_rot6d[j]).unwrap();
            let rm = rot6d_to_matrix(&mid.joint_rot6d[j]).unwrap();
            let d = geodesic_distance(&ra, &rb);
            assert!((geodesic_distance(&ra, &rm) - d / 2.0).abs() < 1e-9);
            assert!((geodesic_distance(&rm, &rb) - d / 2.0).abs() < 1e-9);
        }
        // contacts hold the left key's value until the right key
        for t in 0..8 {
            assert_eq!(dense.contacts.frames[t], seq.contacts.frames[0]);
        }
    }

    #[test]
    fn object_rotation_quarter_turn() {
        let sk = std::sync::Arc::new(SkeletonSpec::chain(5, 0.2).unwrap());
        let mut seq = polyline_sequence(5, &[(0, Vec3::zeros()), (4, Vec3::new(1.0, 0.0, 0.0))]);
        seq.motion.skeleton = sk;
        seq.object.poses[4].rotation = rot_z(std::f64::consts::FRAC_PI_2);
        let keys = KeyActionSet::from_indices(&seq, vec![0, 4]).unwrap();
        let dense = interpolate(&keys).unwrap();
        let r = dense.object.poses[2].rotation;
        assert!((r - rot_z(std::f64::consts::FRAC_PI_4)).norm() < 1e-12);
    }

    #[test]
    fn error_zero_on_identity_and_detects_offset() {
        let seq = random_sequence(2, 12, 5);
        let w = JointWeights::default_for(seq.skeleton());
        let r = reconstruction_error(&seq, &seq, &w).unwrap();
        assert_eq!(r.max_error, 0.0);
        let mut other = seq.clone();
        other.object.poses[7].position.x += 0.3;
        let r = reconstruction_error(&seq, &other, &w).unwrap();
        assert_eq!(r.argmax_frame, 7);
        assert_eq!(r.argmax_point, 5);
        assert!((r.max_error - 0.3).abs() < 1e-12);
        assert_eq!(r.segment_errors(&[0, 5, 11]), vec![0.0, r.max_error]);
    }
}
