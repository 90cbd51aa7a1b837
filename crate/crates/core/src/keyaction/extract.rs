use crate::motion::{HoiSequence, Vec3};
use crate::{Error, Result};

use super::interp::{frame_error, interp_frame, tracked_points, PreparedKey};
use super::{JointWeights, KeyActionSet, KeyFrame};

/// Default error bound in meters.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Evaluates the interpolation error of candidate segments against a dense
/// reference. Shared by the greedy extractor and the exact oracle so both use
/// bit-identical error values.
pub(crate) struct SegmentEvaluator<'a> {
    seq: &'a HoiSequence,
    weights: &'a JointWeights,
    frames: Vec<KeyFrame>,
    reference: Vec<Vec<Vec3>>,
}

impl<'a> SegmentEvaluator<'a> {
    pub fn new(seq: &'a HoiSequence, weights: &'a JointWeights) -> Result<Self> {
        seq.validate()?;
        weights.validate()?;
        let sk = seq.skeleton();
        if weights.joints.len() != sk.joint_count() {
            return Err(Error::shape(format!(
                "{} joint weights for a {}-joint skeleton",
                weights.joints.len(),
                sk.joint_count()
            )));
        }
        let reference = (0..seq.len())
            .map(|t| tracked_points(sk, &seq.motion.frames[t], &seq.object.poses[t]))
            .collect::<Result<Vec<_>>>()?;
        let frames = (0..seq.len())
            .map(|t| KeyFrame::from_sequence(seq, t))
            .collect();
        Ok(Self {
            seq,
            weights,
            frames,
            reference,
        })
    }

    /// Errors of the interior frames `a+1..b` when only `a` and `b` are keys.
    pub fn interior_errors(&self, a: usize, b: usize) -> Result<Vec<f64>> {
        if b <= a + 1 {
            return Ok(vec![]);
        }
        let sk = self.seq.skeleton();
        let ka = PreparedKey::new(&self.frames[a])?;
        let kb = PreparedKey::new(&self.frames[b])?;
        (a + 1..b)
            .map(|t| {
                let f = interp_frame(sk, &ka, a, &kb, b, t);
                let q = tracked_points(sk, &f.pose, &f.object)?;
                Ok(frame_error(&self.reference[t], &q, self.weights).0)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.reference.len()
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::invalid(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    Ok(())
}

/// Recursive minimax extraction: start from the first and last frames and
/// keep splitting each segment at its worst frame (the earliest one on ties)
/// until every interior error is within `epsilon`.
pub fn extract_key_actions(
    seq: &HoiSequence,
    epsilon: f64,
    weights: &JointWeights,
) -> Result<KeyActionSet> {
    check_epsilon(epsilon)?;
    let eval = SegmentEvaluator::new(seq, weights)?;
    let n = eval.len();
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0, n - 1)];
    while let Some((a, b)) = stack.pop() {
        let errors = eval.interior_errors(a, b)?;
        let mut worst: Option<(usize, f64)> = None;
        for (i, &e) in errors.iter().enumerate() {
            if worst.is_none_or(|(_, w)| e > w) {
                worst = Some((a + 1 + i, e));
            }
        }
        if let Some((t, e)) = worst {
            if e > epsilon {
                keep[t] = true;
                stack.push((t, b));
                stack.push((a, t));
            }
        }
    }
    let indices = (0..n).filter(|&t| keep[t]).collect();
    KeyActionSet::from_indices(seq, indices)
}
