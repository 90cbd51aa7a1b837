//! Relative ↔ global conversion (R2G / G2R) and kinematic velocities.

use std::sync::Arc;

use super::rotation::{check_rotation, log_map, rot6d_unchecked};
use super::{GlobalMotion, Mat3, MotionSequence, PoseFrame, SkeletonSpec, Vec3, ROTATION_TOL};
use crate::{Error, Result};

/// Forward kinematics for a single frame: global link positions and orientations.
pub(crate) fn forward_frame(
    skeleton: &SkeletonSpec,
    root_translation: &Vec3,
    local: &[Mat3],
) -> (Vec<Vec3>, Vec<Mat3>) {
    let j = skeleton.joint_count();
    let mut pos = Vec::with_capacity(j);
    let mut rot = Vec::with_capacity(j);
    for (idx, l) in local.iter().enumerate() {
        match skeleton.parent(idx) {
            None => {
                pos.push(root_translation + skeleton.offset(idx));
                rot.push(*l);
            }
            Some(p) => {
                let rp: Mat3 = rot[p];
                pos.push(pos[p] + rp * skeleton.offset(idx));
                rot.push(rp * l);
            }
        }
    }
    (pos, rot)
}

/// R2G: forward kinematics over the parent chain, then kinematic velocities.
pub fn relative_to_global(m: &MotionSequence) -> Result<GlobalMotion> {
    m.validate()?;
    let mut positions = Vec::with_capacity(m.len());
    let mut orientations = Vec::with_capacity(m.len());
    for frame in &m.frames {
        let local = frame.local_rotations()?;
        let (p, r) = forward_frame(&m.skeleton, &frame.root_translation, &local);
        positions.push(p);
        orientations.push(r);
    }
    let (linear_velocity, angular_velocity) =
        finite_difference_velocities(&positions, &orientations, m.frame_rate)?;
    Ok(GlobalMotion {
        positions,
        orientations,
        linear_velocity,
        angular_velocity,
        frame_rate: m.frame_rate,
        skeleton: m.skeleton.clone(),
    })
}

/// G2R: recovers local rotations `R_parentᵀ·R_j` and the root translation.
/// Positions of non-root links are implied by the skeleton and not read.
pub fn global_to_relative(g: &GlobalMotion) -> Result<MotionSequence> {
    let sk: &Arc<SkeletonSpec> = &g.skeleton;
    let j = sk.joint_count();
    if g.positions.len() != g.orientations.len() {
        return Err(Error::shape(
            "position and orientation series differ in length",
        ));
    }
    let mut frames = Vec::with_capacity(g.len());
    for (t, (pos, rot)) in g.positions.iter().zip(&g.orientations).enumerate() {
        if pos.len() != j || rot.len() != j {
            return Err(Error::shape(format!("frame {t}: expected {j} links")));
        }
        for (idx, r) in rot.iter().enumerate() {
            check_rotation(r, ROTATION_TOL)
                .map_err(|e| Error::InvalidRotation(format!("frame {t} link {idx}: {e}")))?;
        }
        let joint_rot6d = (0..j)
            .map(|idx| {
                let local = match sk.parent(idx) {
                    None => rot[idx],
                    Some(p) => rot[p].transpose() * rot[idx],
                };
                rot6d_unchecked(&local)
            })
            .collect();
        frames.push(PoseFrame {
            root_translation: pos[0] - sk.offset(0),
            joint_rot6d,
            joint_positions: None,
        });
    }
    MotionSequence::new(frames, g.frame_rate, sk.clone())
}

/// Forward differences scaled by the frame rate; the last frame repeats the
/// previous estimate. Angular velocity is the axis-angle of `R_{t+1}·R_tᵀ`
/// times the frame rate.
#[allow(clippy::type_complexity)]
pub fn finite_difference_velocities(
    positions: &[Vec<Vec3>],
    orientations: &[Vec<Mat3>],
    frame_rate: f64,
) -> Result<(Vec<Vec<Vec3>>, Vec<Vec<Vec3>>)> {
    let t_len = positions.len();
    if t_len < 2 {
        return Err(Error::invalid(format!(
            "velocities need T >= 2 frames, got {t_len}"
        )));
    }
    if orientations.len() != t_len {
        return Err(Error::shape(
            "position and orientation series differ in length",
        ));
    }
    let mut lin = Vec::with_capacity(t_len);
    let mut ang = Vec::with_capacity(t_len);
    for t in 0..t_len - 1 {
        lin.push(
            positions[t + 1]
                .iter()
                .zip(&positions[t])
                .map(|(a, b)| (a - b) * frame_rate)
                .collect::<Vec<_>>(),
        );
        ang.push(
            orientations[t + 1]
                .iter()
                .zip(&orientations[t])
                .map(|(a, b)| log_map(&(a * b.transpose())) * frame_rate)
                .collect::<Vec<_>>(),
        );
    }
    lin.push(lin[t_len - 2].clone());
    ang.push(ang[t_len - 2].clone());
    Ok((lin, ang))
}

/// Velocities of a single rigid body track (object trajectories).
pub(crate) fn rigid_velocities(
    positions: &[Vec3],
    rotations: &[Mat3],
    frame_rate: f64,
) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let p: Vec<Vec<Vec3>> = positions.iter().map(|p| vec![*p]).collect();
    let r: Vec<Vec<Mat3>> = rotations.iter().map(|r| vec![*r]).collect();
    let (v, w) = finite_difference_velocities(&p, &r, frame_rate)?;
    Ok((
        v.into_iter().map(|x| x[0]).collect(),
        w.into_iter().map(|x| x[0]).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::rotation::{exp_map, matrix_to_rot6d, rot_z};
    use crate::motion::{Joint, JointRole};
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn two_link() -> Arc<SkeletonSpec> {
        // root plus a child at (1,0,0); the role-holding joints hang off the root
        let mut joints = vec![
            Joint {
                name: "root".into(),
                parent: None,
                offset: Vec3::zeros(),
                role: JointRole::Root,
                key: true,
            },
            Joint {
                name: "child".into(),
                parent: Some(0),
                offset: Vec3::new(1.0, 0.0, 0.0),
                role: JointRole::Body,
                key: true,
            },
        ];
        for (i, role) in [
            JointRole::LeftHand,
            JointRole::RightHand,
            JointRole::LeftFoot,
            JointRole::RightFoot,
        ]
        .into_iter()
        .enumerate()
        {
            joints.push(Joint {
                name: format!("ee{i}"),
                parent: Some(1),
                offset: Vec3::new(0.0, 0.1 * (i as f64 + 1.0), 0.0),
                role,
                key: true,
            });
        }
        Arc::new(SkeletonSpec::new(joints).unwrap())
    }

    fn random_sequence(sk: &Arc<SkeletonSpec>, t: usize, seed: u64) -> MotionSequence {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let frames = (0..t)
            .map(|_| PoseFrame {
                root_translation: Vec3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(0.0..1.5),
                ),
                joint_rot6d: (0..sk.joint_count())
                    .map(|_| {
                        let axis = Vec3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        );
                        matrix_to_rot6d(&exp_map(&(axis.normalize() * rng.random_range(0.0..PI))))
                            .unwrap()
                    })
                    .collect(),
                joint_positions: None,
            })
            .collect();
        MotionSequence::new(frames, 30.0, sk.clone()).unwrap()
    }

    #[test]
    fn rest_pose_gives_cumulative_offsets() {
        let sk = Arc::new(SkeletonSpec::chain(6, 0.25).unwrap());
        let m = MotionSequence::new(vec![PoseFrame::rest(6); 2], 30.0, sk).unwrap();
        let g = relative_to_global(&m).unwrap();
        for j in 0..6 {
            assert_eq!(g.positions[0][j], Vec3::new(0.25 * j as f64, 0.0, 0.0));
            assert_eq!(g.orientations[1][j], Mat3::identity());
        }
    }

    #[test]
    fn rotated_root_moves_child() {
        let sk = two_link();
        let mut f = PoseFrame::rest(sk.joint_count());
        f.joint_rot6d[0] = matrix_to_rot6d(&rot_z(FRAC_PI_2)).unwrap();
        let m = MotionSequence::new(vec![f.clone(), f], 30.0, sk).unwrap();
        let g = relative_to_global(&m).unwrap();
        assert!((g.positions[0][1] - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn global_relative_round_trip() {
        let sk = two_link();
        for seed in 0..20 {
            let m = random_sequence(&sk, 12, seed);
            let back = global_to_relative(&relative_to_global(&m).unwrap()).unwrap();
            for (a, b) in m.frames.iter().zip(&back.frames) {
                assert!((a.root_translation - b.root_translation).abs().max() < 1e-6);
                for (ra, rb) in a.joint_rot6d.iter().zip(&b.joint_rot6d) {
                    for k in 0..6 {
                        assert!((ra[k] - rb[k]).abs() < 1e-6);
                    }
                }
            }
            // and the other direction
            let g = relative_to_global(&m).unwrap();
            let g2 = relative_to_global(&back).unwrap();
            for t in 0..g.len() {
                for j in 0..sk.joint_count() {
                    assert!((g.positions[t][j] - g2.positions[t][j]).abs().max() < 1e-6);
                    assert!((g.orientations[t][j] - g2.orientations[t][j]).abs().max() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rest_round_trip_is_exact() {
        let sk = two_link();
        let m = MotionSequence::new(vec![PoseFrame::rest(sk.joint_count()); 3], 30.0, sk).unwrap();
        let back = global_to_relative(&relative_to_global(&m).unwrap()).unwrap();
        assert_eq!(back.frames, m.frames);
    }

    #[test]
    fn g2r_rejects_non_orthonormal() {
        let sk = two_link();
        let m = MotionSequence::new(vec![PoseFrame::rest(sk.joint_count()); 3], 30.0, sk).unwrap();
        let mut g = relative_to_global(&m).unwrap();
        g.orientations[1][2] *= 1.1;
        assert!(matches!(
            global_to_relative(&g),
            Err(Error::InvalidRotation(_))
        ));
    }

    #[test]
    fn velocities_static_and_linear() {
        let fps = 30.0;
        let pos: Vec<Vec<Vec3>> = (0..10).map(|_| vec![Vec3::new(1.0, 2.0, 3.0)]).collect();
        let rot: Vec<Vec<Mat3>> = (0..10).map(|_| vec![Mat3::identity()]).collect();
        let (v, w) = finite_difference_velocities(&pos, &rot, fps).unwrap();
        assert!(v.iter().chain(&w).all(|f| f[0] == Vec3::zeros()));

        let pos: Vec<Vec<Vec3>> = (0..10)
            .map(|t| vec![Vec3::new(t as f64 / fps, 0.0, 0.0)])
            .collect();
        let (v, _) = finite_difference_velocities(&pos, &rot, fps).unwrap();
        assert_eq!(v.len(), 10);
        assert!(v
            .iter()
            .all(|f| (f[0] - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn spin_angular_velocity() {
        let fps = 30.0;
        let pos: Vec<Vec<Vec3>> = (0..6).map(|_| vec![Vec3::zeros()]).collect();
        let rot: Vec<Vec<Mat3>> = (0..6).map(|t| vec![rot_z(FRAC_PI_2 * t as f64)]).collect();
        let (_, w) = finite_difference_velocities(&pos, &rot, fps).unwrap();
        for f in &w {
            assert!((f[0] - Vec3::new(0.0, 0.0, 30.0 * FRAC_PI_2)).norm() < 1e-9);
        }
    }

    #[test]
    fn velocities_need_two_frames() {
        assert!(finite_difference_velocities(
            &[vec![Vec3::zeros()]],
            &[vec![Mat3::identity()]],
            30.0
        )
        .is_err());
    }

    #[test]
    fn cubic_velocity_within_truncation_bound() {
        // x(t) = a t^3 + b t^2 + c t sampled at 120 Hz
        let (a, b, c) = (0.8, -1.3, 0.4);
        let fps = 120.0;
        let h = 1.0 / fps;
        let n = 240;
        let x = |t: f64| a * t * t * t + b * t * t + c * t;
        let dx = |t: f64| 3.0 * a * t * t + 2.0 * b * t + c;
        let pos: Vec<Vec<Vec3>> = (0..n)
            .map(|i| vec![Vec3::new(x(i as f64 * h), 0.0, 0.0)])
            .collect();
        let rot: Vec<Vec<Mat3>> = vec![vec![Mat3::identity()]; n];
        let (v, _) = finite_difference_velocities(&pos, &rot, fps).unwrap();
        let t_max = (n - 1) as f64 * h;
        let max_d2 = (6.0 * a * t_max).abs() + 2.0 * b.abs();
        let max_d3 = (6.0 * a).abs();
        // forward (last frame: backward) difference truncation error is at most
        // h/2·max|f2| + h²/6·max|f3|; checked at twice that
        let bound = 2.0 * (max_d2 * h / 2.0 + max_d3 * h * h / 6.0);
        for (i, f) in v.iter().enumerate() {
            let err = (f[0].x - dx(i as f64 * h)).abs();
            assert!(err <= bound, "frame {i}: err {err} > {bound}");
        }
    }
}
