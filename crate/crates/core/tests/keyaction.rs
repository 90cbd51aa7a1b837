use std::f64::consts::PI;
use std::sync::Arc;

use hoikit::keyaction::{
    extract_key_actions, interpolate, optimal_key_actions_oracle, reconstruction_error,
    JointWeights, KeyActionSet,
};
use hoikit::motion::rotation::{exp_map, matrix_to_rot6d, rot6d_to_matrix, rot_z, rotation_angle};
use hoikit::motion::{
    ContactChannels, HoiSequence, MotionSequence, ObjectPose, ObjectTrajectory, PoseFrame,
    SequenceMeta, SkeletonSpec, Vec3,
};
use rand::{Rng, SeedableRng};

fn build(frames: Vec<PoseFrame>, objects: Vec<ObjectPose>, sk: SkeletonSpec) -> HoiSequence {
    let t = frames.len();
    HoiSequence::new(
        MotionSequence::new(frames, 30.0, Arc::new(sk)).unwrap(),
        ObjectTrajectory {
            poses: objects,
            frame_rate: 30.0,
        },
        ContactChannels::zeros(t),
        SequenceMeta::default(),
    )
    .unwrap()
}

fn root_path(path: impl Fn(usize) -> Vec3, t_len: usize) -> HoiSequence {
    let frames = (0..t_len)
        .map(|t| PoseFrame {
            root_translation: path(t),
            ..PoseFrame::rest(5)
        })
        .collect();
    let objects = (0..t_len)
        .map(|_| ObjectPose::identity_at(Vec3::new(0.0, 1.0, 0.5)))
        .collect();
    build(frames, objects, SkeletonSpec::chain(5, 0.2).unwrap())
}

fn random_walk(seed: u64, t_len: usize) -> HoiSequence {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut axes = vec![Vec3::zeros(); 6];
    let mut root = Vec3::zeros();
    let mut obj = Vec3::new(0.4, 0.0, 0.8);
    let mut frames = vec![];
    let mut objects = vec![];
    for _ in 0..t_len {
        for a in &mut axes {
            *a += Vec3::from_fn(|_, _| rng.random_range(-0.2..0.2));
        }
        root += Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05));
        obj += Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05));
        frames.push(PoseFrame {
            root_translation: root,
            joint_rot6d: axes
                .iter()
                .map(|a| matrix_to_rot6d(&exp_map(a)).unwrap())
                .collect(),
            joint_positions: None,
        });
        objects.push(ObjectPose::new(obj, exp_map(&axes[1])));
    }
    build(frames, objects, SkeletonSpec::chain(6, 0.15).unwrap())
}

fn corner_sequence(t_len: usize) -> HoiSequence {
    root_path(
        |t| {
            if t <= 5 {
                Vec3::new(0.1 * t as f64, 0.0, 0.0)
            } else {
                Vec3::new(0.5, 0.1 * (t - 5) as f64, 0.0)
            }
        },
        t_len,
    )
}

#[test]
fn linear_keys_reproduce_linear_data() {
    let seq = root_path(|t| Vec3::new(0.1 * t as f64, -0.05 * t as f64, 0.9), 10);
    let w = JointWeights::default_for(seq.skeleton());
    for idx in [vec![0, 9], (0..10).collect()] {
        let dense = interpolate(&KeyActionSet::from_indices(&seq, idx).unwrap()).unwrap();
        for t in 0..10 {
            let d = dense.motion.frames[t].root_translation - seq.motion.frames[t].root_translation;
            assert!(d.norm() < 1e-12);
        }
        assert!(reconstruction_error(&seq, &dense, &w).unwrap().max_error < 1e-12);
    }
}

#[test]
fn spherical_interpolation_arithmetic() {
    let angles = |t: usize| if t >= 5 { 90.0 } else { 18.0 * t as f64 };
    let frames = (0..10)
        .map(|t| {
            let mut f = PoseFrame::rest(5);
            f.joint_rot6d[0] = matrix_to_rot6d(&rot_z(angles(t).to_radians())).unwrap();
            f
        })
        .collect();
    let objects = (0..10)
        .map(|_| ObjectPose::identity_at(Vec3::zeros()))
        .collect();
    let seq = build(frames, objects, SkeletonSpec::chain(5, 0.2).unwrap());
    let dense = interpolate(&KeyActionSet::from_indices(&seq, vec![0, 5, 9]).unwrap()).unwrap();
    let r = rot6d_to_matrix(&dense.motion.frames[2].joint_rot6d[0]).unwrap();
    assert!((rotation_angle(&r).to_degrees() - 36.0).abs() < 1e-9);
    assert!((r - rot_z(36f64.to_radians())).norm() < 1e-9);
    let r7 = rot6d_to_matrix(&dense.motion.frames[7].joint_rot6d[0]).unwrap();
    assert!((r7 - rot_z(PI / 2.0)).norm() < 1e-9);
}

#[test]
fn weighted_maximum_by_hand() {
    let reference = root_path(|_| Vec3::zeros(), 3);
    // recon: whole body shifted 0.1 m in x, joint 1 further out by 0.2 m
    let base = SkeletonSpec::chain(5, 0.2).unwrap();
    let mut joints = base.joints().to_vec();
    joints[1].offset.x += 0.2;
    for j in &mut joints[2..] {
        j.offset = Vec3::zeros();
    }
    let mut ref_joints = base.joints().to_vec();
    for j in &mut ref_joints[2..] {
        j.offset = Vec3::zeros();
    }
    let ref_sk = SkeletonSpec::new(ref_joints).unwrap();
    let frames = (0..3).map(|_| PoseFrame::rest(5)).collect::<Vec<_>>();
    let objects: Vec<ObjectPose> = reference.object.poses.clone();
    let reference = build(frames.clone(), objects.clone(), ref_sk);
    let shifted = frames
        .iter()
        .map(|f| PoseFrame {
            root_translation: Vec3::new(0.1, 0.0, 0.0),
            ..f.clone()
        })
        .collect();
    let recon = build(shifted, objects, SkeletonSpec::new(joints).unwrap());
    let w = JointWeights::new(vec![4.0, 1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
    let r = reconstruction_error(&reference, &recon, &w).unwrap();
    assert!((r.max_error - 0.4).abs() < 1e-12);
    assert_eq!((r.argmax_frame, r.argmax_point), (0, 0));
    let w = JointWeights::new(vec![1.0, 1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
    let r = reconstruction_error(&reference, &recon, &w).unwrap();
    assert!((r.max_error - 0.3).abs() < 1e-12, "{r:?}");
    assert_eq!(r.argmax_point, 1);
    assert!(reconstruction_error(&reference, &random_walk(0, 3), &w).is_err());
    assert!(reconstruction_error(&reference, &root_path(|_| Vec3::zeros(), 4), &w).is_err());
}

#[test]
fn single_corner() {
    let seq = corner_sequence(12);
    let w = JointWeights::default_for(seq.skeleton());
    assert_eq!(
        extract_key_actions(&seq, 0.01, &w).unwrap().indices,
        vec![0, 5, 11]
    );
    let opt = optimal_key_actions_oracle(&seq, 0.01, &w).unwrap();
    assert_eq!(opt.len(), 3);
    let line = root_path(|t| Vec3::new(0.0, 0.0, 0.02 * t as f64), 20);
    assert_eq!(
        optimal_key_actions_oracle(&line, 0.01, &w).unwrap().indices,
        vec![0, 19]
    );
}

#[test]
fn sine_wave_meets_bound() {
    let seq = root_path(
        |t| {
            Vec3::new(
                0.02 * t as f64,
                0.0,
                0.9 + 0.3 * (2.0 * PI * t as f64 / 30.0).sin(),
            )
        },
        60,
    );
    let w = JointWeights::default_for(seq.skeleton());
    let k = extract_key_actions(&seq, 0.05, &w).unwrap();
    assert_eq!((k.indices[0], *k.indices.last().unwrap()), (0, 59));
    assert!(k.len() > 2);
    let r = reconstruction_error(&seq, &interpolate(&k).unwrap(), &w).unwrap();
    assert!(r.max_error <= 0.05);
}

#[test]
fn oracle_dominates_extractor_over_100_seeds() {
    for seed in 0..100 {
        let seq = random_walk(seed, 20);
        let w = JointWeights::default_for(seq.skeleton());
        let opt = optimal_key_actions_oracle(&seq, 0.05, &w).unwrap();
        let ext = extract_key_actions(&seq, 0.05, &w).unwrap();
        assert!(opt.len() <= ext.len(), "seed {seed}");
        for k in [&opt, &ext] {
            assert!(
                reconstruction_error(&seq, &interpolate(k).unwrap(), &w)
                    .unwrap()
                    .max_error
                    <= 0.05
            );
        }
    }
}

#[test]
fn monotone_in_epsilon_and_deterministic() {
    for seed in 0..20 {
        let seq = random_walk(seed, 50);
        let w = JointWeights::default_for(seq.skeleton());
        let mut prev = usize::MAX;
        for eps in [0.005, 0.01, 0.03, 0.05, 0.1, 0.3] {
            let k = extract_key_actions(&seq, eps, &w).unwrap();
            assert!(k.len() <= prev);
            prev = k.len();
            assert_eq!(k, extract_key_actions(&seq, eps, &w).unwrap());
        }
    }
}
