//! Generation and tracking evaluation metrics. Distances are reported in
//! millimetres.

mod report;
mod tracking;

pub use report::{emit_report, parse_csv, MetricRecord, ReportFormat};
pub use tracking::{tracking_metrics, TrackingMetricConfig, TrackingMetrics, MIN_CONTACT_SEGMENT};

use crate::geometry::TriangleMesh;
use crate::motion::{
    relative_to_global, ContactChannels, GlobalMotion, HoiSequence, ObjectTrajectory, Vec3,
};
use crate::{Error, Result};

pub(crate) const MM: f64 = 1000.0;

/// One row of the generation table; `None` renders as "-".
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GenerationMetrics {
    pub name: String,
    pub t_s: Option<f64>,
    pub t_e: Option<f64>,
    pub t_xy: Option<f64>,
    pub h_feet: Option<f64>,
    pub fs: Option<f64>,
    pub c_prec: Option<f64>,
    pub c_rec: Option<f64>,
    pub c_f1: Option<f64>,
    pub c_pct: Option<f64>,
    pub p_hand: Option<f64>,
    pub mpjpe: Option<f64>,
    pub t_root: Option<f64>,
    pub t_obj: Option<f64>,
    pub o_obj: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionMatch {
    pub t_s: f64,
    pub t_e: f64,
    /// `None` without waypoints.
    pub t_xy: Option<f64>,
}

/// Start, end (3D) and waypoint (planar) distances of an object trajectory
/// to its conditions.
pub fn condition_matching(
    generated: &ObjectTrajectory,
    start: &Vec3,
    waypoints: &[(usize, [f64; 2])],
    target: Option<&Vec3>,
) -> Result<ConditionMatch> {
    let target = target.ok_or_else(|| Error::invalid("condition matching needs a target"))?;
    let p = &generated.poses;
    let (first, last) = match (p.first(), p.last()) {
        (Some(a), Some(b)) => (a.position, b.position),
        _ => return Err(Error::invalid("empty object trajectory")),
    };
    let mut planar = Vec::with_capacity(waypoints.len());
    for (f, xy) in waypoints {
        let q = p.get(*f).ok_or_else(|| {
            Error::invalid(format!(
                "waypoint frame {f} beyond trajectory of {}",
                p.len()
            ))
        })?;
        planar.push(((q.position.x - xy[0]).powi(2) + (q.position.y - xy[1]).powi(2)).sqrt());
    }
    Ok(ConditionMatch {
        t_s: (first - start).norm() * MM,
        t_e: (last - target).norm() * MM,
        t_xy: (!planar.is_empty()).then(|| planar.iter().sum::<f64>() / planar.len() as f64 * MM),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootConfig {
    /// Height above which a foot contributes no sliding (m).
    pub h_max: f64,
    /// Height at or below which a foot counts as on the ground (m).
    pub contact_height: f64,
}

impl Default for FootConfig {
    fn default() -> Self {
        Self {
            h_max: 0.05,
            contact_height: 0.05,
        }
    }
}

/// `(H_feet, FS)` in mm, heights measured along z.
///
/// `H_feet` is the mean foot height over foot-frames labelled in contact
/// (`labels[t][k]` for foot `k`, or height `≤ contact_height` when no labels
/// are given). `FS` averages, over foot-frames `t ≥ 1` with height
/// `h < h_max`, the horizontal displacement since `t − 1` weighted by
/// `2 − 2^(h / h_max)`.
pub fn foot_metrics(
    motion: &GlobalMotion,
    labels: Option<&[[bool; 2]]>,
    cfg: &FootConfig,
) -> Result<(f64, f64)> {
    if !(cfg.h_max > 0.0) {
        return Err(Error::invalid("h_max must be positive"));
    }
    let feet = motion.skeleton.feet();
    if feet[0] == feet[1] {
        return Err(Error::invalid("skeleton has no distinct foot joints"));
    }
    if let Some(l) = labels {
        if l.len() != motion.len() {
            return Err(Error::shape(format!(
                "{} foot labels for {} frames",
                l.len(),
                motion.len()
            )));
        }
    }
    let (mut h_sum, mut h_n, mut fs_sum, mut fs_n) = (0.0, 0usize, 0.0, 0usize);
    for t in 0..motion.len() {
        for (k, &j) in feet.iter().enumerate() {
            let p = motion.positions[t][j];
            let grounded = match labels {
                Some(l) => l[t][k],
                None => p.z <= cfg.contact_height,
            };
            if grounded {
                h_sum += p.z;
                h_n += 1;
            }
            if t > 0 && p.z < cfg.h_max {
                let q = motion.positions[t - 1][j];
                let d = ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt();
                fs_sum += d * (2.0 - 2f64.powf(p.z / cfg.h_max));
                fs_n += 1;
            }
        }
    }
    let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 * MM };
    Ok((mean(h_sum, h_n), mean(fs_sum, fs_n)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Fraction of frames with any predicted hand contact.
    pub percent: f64,
}

/// Hand-channel contact scores pooled over channels and frames, with both
/// series thresholded at 0.5. With no predicted positives precision is 1 if
/// there are also no missed positives and 0 otherwise; recall mirrors this.
pub fn contact_metrics(
    predicted: &ContactChannels,
    truth: &ContactChannels,
) -> Result<ContactScores> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predicted frames, {} ground-truth frames",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("no frames to score"));
    }
    let (mut tp, mut fp, mut fn_, mut any) = (0usize, 0usize, 0usize, 0usize);
    for (p, g) in predicted.frames.iter().zip(&truth.frames) {
        let mut hit = false;
        for c in 0..2 {
            let (pp, gg) = (p[c] >= 0.5, g[c] >= 0.5);
            hit |= pp;
            match (pp, gg) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        any += hit as usize;
    }
    let ratio = |num: usize, den: usize, other: usize| {
        if den == 0 {
            if other == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp, fn_);
    let recall = ratio(tp, tp + fn_, fp);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(ContactScores {
        precision,
        recall,
        f1,
        percent: any as f64 / predicted.len() as f64,
    })
}

/// Mean over frames and hands of the penetration depth `max(0, −sdf)` of each
/// hand joint in the object's frame, in mm.
pub fn hand_penetration(
    motion: &GlobalMotion,
    object: &ObjectTrajectory,
    mesh: &TriangleMesh,
) -> Result<f64> {
    if !mesh.is_watertight() {
        return Err(Error::NotWatertight(
            "hand penetration needs a closed mesh".into(),
        ));
    }
    if motion.len() != object.len() || motion.is_empty() {
        return Err(Error::shape(format!(
            "motion has {} frames, object {}",
            motion.len(),
            object.len()
        )));
    }
    let hands = motion.skeleton.hands();
    let mut sum = 0.0;
    for (links, pose) in motion.positions.iter().zip(&object.poses) {
        for &h in &hands {
            let d = mesh.signed_distance(&pose.inverse_transform_point(&links[h]))?;
            sum += (-d).max(0.0);
        }
    }
    Ok(sum / (motion.len() * hands.len()) as f64 * MM)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GtDifference {
    pub mpjpe: f64,
    pub t_root: f64,
    pub t_obj: f64,
    pub o_obj: f64,
}

/// Errors against ground truth (mm, except the unitless Frobenius `o_obj`).
/// With `root_relative` joint positions are taken relative to the root link
/// before comparing.
pub fn gt_difference(
    generated: &HoiSequence,
    truth: &HoiSequence,
    root_relative: bool,
) -> Result<GtDifference> {
    if generated.len() != truth.len() || generated.is_empty() {
        return Err(Error::shape(format!(
            "generated has {} frames, ground truth {}",
            generated.len(),
            truth.len()
        )));
    }
    if generated.skeleton().joint_count() != truth.skeleton().joint_count() {
        return Err(Error::shape("joint counts differ"));
    }
    let a = relative_to_global(&generated.motion)?;
    let b = relative_to_global(&truth.motion)?;
    gt_difference_global(&a, &generated.object, &b, &truth.object, root_relative)
}

pub(crate) fn gt_difference_global(
    a: &GlobalMotion,
    ao: &ObjectTrajectory,
    b: &GlobalMotion,
    bo: &ObjectTrajectory,
    root_relative: bool,
) -> Result<GtDifference> {
    let t_len = a.len();
    if b.len() != t_len || ao.len() != t_len || bo.len() != t_len {
        return Err(Error::shape("generated and ground-truth lengths differ"));
    }
    let j = a.skeleton.joint_count();
    let (mut joint, mut root, mut tobj, mut oobj) = (0.0, 0.0, 0.0, 0.0);
    for t in 0..t_len {
        let (ra, rb) = (a.positions[t][0], b.positions[t][0]);
        for k in 0..j {
            let (pa, pb) = (a.positions[t][k], b.positions[t][k]);
            joint += if root_relative {
                ((pa - ra) - (pb - rb)).norm()
            } else {
                (pa - pb).norm()
            };
        }
        root += (ra - rb).norm();
        tobj += (ao.poses[t].position - bo.poses[t].position).norm();
        oobj += (ao.poses[t].rotation - bo.poses[t].rotation).norm();
    }
    let n = t_len as f64;
    Ok(GtDifference {
        mpjpe: joint / (n * j as f64) * MM,
        t_root: root / n * MM,
        t_obj: tobj / n * MM,
        o_obj: oobj / n,
    })
}

/// Inputs for the full generation row of one sequence.
pub struct GenerationInput<'a> {
    pub generated: &'a HoiSequence,
    pub truth: Option<&'a HoiSequence>,
    pub mesh: &'a TriangleMesh,
    /// Given start object position; defaults to the ground truth's, else the
    /// generated sequence's own first frame.
    pub start: Option<Vec3>,
}

/// Every generation metric that the inputs support. Waypoints and target
/// come from the generated sequence's metadata (the conditions it was
/// generated under), falling back to the ground truth's.
pub fn generation_metrics(
    input: &GenerationInput,
    foot: &FootConfig,
    root_relative: bool,
) -> Result<GenerationMetrics> {
    let g = input.generated;
    let global = relative_to_global(&g.motion)?;
    let mut m = GenerationMetrics {
        name: g.meta.name.clone(),
        ..Default::default()
    };
    let cond = match input.truth {
        Some(t) if g.meta.target.is_none() => &t.meta,
        _ => &g.meta,
    };
    let start = input
        .start
        .or_else(|| input.truth.map(|t| t.object.poses[0].position))
        .unwrap_or(g.object.poses[0].position);
    if cond.target.is_some() {
        let c = condition_matching(&g.object, &start, &cond.waypoints, cond.target.as_ref())?;
        (m.t_s, m.t_e, m.t_xy) = (Some(c.t_s), Some(c.t_e), c.t_xy);
    }
    let labels: Vec<[bool; 2]> = g
        .contacts
        .frames
        .iter()
        .map(|c| [c[2] >= 0.5, c[3] >= 0.5])
        .collect();
    let (h, fs) = foot_metrics(&global, Some(&labels), foot)?;
    (m.h_feet, m.fs) = (Some(h), Some(fs));
    m.p_hand = Some(hand_penetration(&global, &g.object, input.mesh)?);
    if let Some(truth) = input.truth {
        let s = contact_metrics(&g.contacts, &truth.contacts)?;
        (m.c_prec, m.c_rec, m.c_f1, m.c_pct) = (
            Some(s.precision),
            Some(s.recall),
            Some(s.f1),
            Some(s.percent),
        );
        let d = gt_difference_global(
            &global,
            &g.object,
            &relative_to_global(&truth.motion)?,
            &truth.object,
            root_relative,
        )?;
        (m.mpjpe, m.t_root, m.t_obj, m.o_obj) =
            (Some(d.mpjpe), Some(d.t_root), Some(d.t_obj), Some(d.o_obj));
    }
    Ok(m)
}
