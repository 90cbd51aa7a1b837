use super::TriangleMesh;
use crate::motion::{ContactChannels, GlobalMotion, ObjectTrajectory, CONTACT_CHANNELS};
use crate::{Error, Result};

pub const DEFAULT_CONTACT_THRESHOLD: f64 = 0.05;

/// Binary contact labels: a channel is 1 when its end-effector joint lies
/// strictly closer than `threshold` to the object surface at that frame.
pub fn detect_contacts(
    motion: &GlobalMotion,
    object: &ObjectTrajectory,
    mesh: &TriangleMesh,
    threshold: f64,
) -> Result<ContactChannels> {
    if motion.len() != object.len() {
        return Err(Error::shape(format!(
            "motion has {} frames, object trajectory {}",
            motion.len(),
            object.len()
        )));
    }
    let ee = motion.skeleton.end_effectors();
    let frames = motion
        .positions
        .iter()
        .zip(&object.poses)
        .map(|(links, pose)| {
            let mut c = [0.0; CONTACT_CHANNELS];
            for (ch, &j) in ee.iter().enumerate() {
                let local = pose.inverse_transform_point(&links[j]);
                if mesh.unsigned_distance(&local) < threshold {
                    c[ch] = 1.0;
                }
            }
            c
        })
        .collect();
    Ok(ContactChannels { frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{
        relative_to_global, MotionSequence, ObjectPose, PoseFrame, SkeletonSpec, Vec3,
    };
    use std::sync::Arc;

    fn hand_at(sk: &Arc<SkeletonSpec>, hand: Vec3) -> GlobalMotion {
        // chain skeleton along +x: left hand is joint n-4
        let lh = sk.end_effectors()[0];
        let offset: Vec3 = (1..=lh).map(|j| sk.offset(j)).sum();
        let mut f = PoseFrame::rest(sk.joint_count());
        f.root_translation = hand - offset;
        relative_to_global(&MotionSequence::new(vec![f.clone(), f], 30.0, sk.clone()).unwrap())
            .unwrap()
    }

    #[test]
    fn thresholds() {
        let sk = Arc::new(SkeletonSpec::chain(5, 0.1).unwrap());
        let sphere = TriangleMesh::icosphere(1.0, 4).unwrap();
        let center = Vec3::new(2.0, 0.0, 0.0);
        let traj = ObjectTrajectory {
            poses: vec![ObjectPose::identity_at(center); 2],
            frame_rate: 30.0,
        };

        let vertex = sphere.vertices()[0] + center;
        let c = detect_contacts(&hand_at(&sk, vertex), &traj, &sphere, 0.05).unwrap();
        assert_eq!(c.frames[0][0], 1.0);

        let far = center + Vec3::new(0.0, 2.0, 0.0);
        let c = detect_contacts(&hand_at(&sk, far), &traj, &sphere, 0.05).unwrap();
        assert_eq!(c.frames[0][0], 0.0);

        // 0.04 m outside the analytic surface; tessellation error is far below 0.01
        let near = center + Vec3::new(0.0, 0.0, 1.04);
        let c = detect_contacts(&hand_at(&sk, near), &traj, &sphere, 0.05).unwrap();
        assert_eq!(c.frames[1][0], 1.0);
    }

    #[test]
    fn length_mismatch() {
        let sk = Arc::new(SkeletonSpec::chain(5, 0.1).unwrap());
        let sphere = TriangleMesh::icosphere(1.0, 1).unwrap();
        let traj = ObjectTrajectory {
            poses: vec![ObjectPose::identity_at(Vec3::zeros()); 3],
            frame_rate: 30.0,
        };
        assert!(detect_contacts(&hand_at(&sk, Vec3::zeros()), &traj, &sphere, 0.05).is_err());
    }
}
