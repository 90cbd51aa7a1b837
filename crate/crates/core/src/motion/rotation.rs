//! Rotation utilities: the continuous 6-DOF representation, rotation
//! differences, log/exp maps and spherical interpolation.

use nalgebra::{Rotation3, UnitQuaternion};

use super::{Mat3, Vec3};
use crate::{Error, Result};

/// Tolerance used when validating externally supplied rotation matrices.
pub const ROTATION_TOL: f64 = 1e-6;

/// Decodes a 6-DOF rotation (first two matrix columns, column 1 then
/// column 2) by Gram-Schmidt orthonormalization.
pub fn rot6d_to_matrix(r: &[f64; 6]) -> Result<Mat3> {
    let a1 = Vec3::new(r[0], r[1], r[2]);
    let a2 = Vec3::new(r[3], r[4], r[5]);
    if !a1.iter().chain(a2.iter()).all(|v| v.is_finite()) {
        return Err(Error::DegenerateRotation(format!(
            "non-finite 6-DOF rotation {r:?}"
        )));
    }
    let n1 = a1.norm();
    if n1 < 1e-12 {
        return Err(Error::DegenerateRotation(format!(
            "zero first column in {r:?}"
        )));
    }
    let b1 = a1 / n1;
    let resid = a2 - b1 * b1.dot(&a2);
    let nr = resid.norm();
    if nr < 1e-12 || nr < 1e-9 * a2.norm() {
        return Err(Error::DegenerateRotation(format!(
            "parallel or zero second column in {r:?}"
        )));
    }
    let b2 = resid / nr;
    let b3 = b1.cross(&b2);
    Ok(Mat3::from_columns(&[b1, b2, b3]))
}

/// First two columns of `m`, flattened column-wise.
pub fn matrix_to_rot6d(m: &Mat3) -> Result<[f64; 6]> {
    check_rotation(m, ROTATION_TOL)?;
    Ok(rot6d_unchecked(m))
}

pub(crate) fn rot6d_unchecked(m: &Mat3) -> [f64; 6] {
    [
        m[(0, 0)],
        m[(1, 0)],
        m[(2, 0)],
        m[(0, 1)],
        m[(1, 1)],
        m[(2, 1)],
    ]
}

/// Orthonormality and determinant check.
pub fn check_rotation(m: &Mat3, tol: f64) -> Result<()> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidRotation("non-finite entries".into()));
    }
    let err = (m.transpose() * m - Mat3::identity()).abs().max();
    let det = m.determinant();
    if err > tol || (det - 1.0).abs() > tol {
        return Err(Error::InvalidRotation(format!(
            "orthonormality error {err:.3e}, determinant {det:.9}"
        )));
    }
    Ok(())
}

pub fn is_rotation(m: &Mat3, tol: f64) -> bool {
    check_rotation(m, tol).is_ok()
}

/// `a ⊖ b = a·bᵀ`, the rotation taking `b` to `a`.
pub fn rotation_difference(a: &Mat3, b: &Mat3) -> Mat3 {
    a * b.transpose()
}

fn to_quat(m: &Mat3) -> UnitQuaternion<f64> {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m))
}

/// Axis-angle vector (axis scaled by angle in radians) of a rotation matrix.
pub fn log_map(m: &Mat3) -> Vec3 {
    to_quat(m).scaled_axis()
}

pub fn exp_map(axis_angle: &Vec3) -> Mat3 {
    Rotation3::new(*axis_angle).into_inner()
}

/// Geodesic angle of a rotation, in `[0, π]`.
pub fn rotation_angle(m: &Mat3) -> f64 {
    to_quat(m).angle()
}

/// Geodesic distance between two rotations.
pub fn geodesic_distance(a: &Mat3, b: &Mat3) -> f64 {
    rotation_angle(&rotation_difference(a, b))
}

/// Spherical linear interpolation between two rotations, `t ∈ [0, 1]`.
pub fn slerp(a: &Mat3, b: &Mat3, t: f64) -> Mat3 {
    a * exp_map(&(log_map(&(a.transpose() * b)) * t))
}

pub fn rot_z(angle: f64) -> Mat3 {
    exp_map(&Vec3::new(0.0, 0.0, angle))
}

pub fn rot_y(angle: f64) -> Mat3 {
    exp_map(&Vec3::new(0.0, angle, 0.0))
}

pub fn rot_x(angle: f64) -> Mat3 {
    exp_map(&Vec3::new(angle, 0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_rotation(rng: &mut impl Rng) -> Mat3 {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let angle = rng.random_range(0.0..PI);
        exp_map(&(axis.normalize() * angle))
    }

    #[test]
    fn identity_decodes() {
        let m = rot6d_to_matrix(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(m, Mat3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let m = rot6d_to_matrix(&[0.0, 1.0, 0.0, -1.0, 0.0, 0.0]).unwrap();
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((m - expected).abs().max() < 1e-12);
        assert!((m - rot_z(FRAC_PI_2)).abs().max() < 1e-12);
    }

    #[test]
    fn scale_invariant() {
        let m = rot6d_to_matrix(&[2.0, 0.0, 0.0, 0.0, 3.0, 0.0]).unwrap();
        assert!((m - Mat3::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(matches!(
            rot6d_to_matrix(&[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            Err(Error::DegenerateRotation(_))
        ));
        assert!(matches!(
            rot6d_to_matrix(&[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]),
            Err(Error::DegenerateRotation(_))
        ));
        assert!(matches!(
            rot6d_to_matrix(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::DegenerateRotation(_))
        ));
    }

    #[test]
    fn encode_known_rotations() {
        assert_eq!(
            matrix_to_rot6d(&Mat3::identity()).unwrap(),
            [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]
        );
        let rx = Mat3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        assert_eq!(
            matrix_to_rot6d(&rx).unwrap(),
            [1.0, 0.0, 0.0, 0.0, -1.0, 0.0]
        );
        let r6 = matrix_to_rot6d(&rot_x(PI)).unwrap();
        let expected = [1.0, 0.0, 0.0, 0.0, -1.0, 0.0];
        for (a, b) in r6.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn non_orthonormal_rejected() {
        let m = Mat3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            matrix_to_rot6d(&m),
            Err(Error::InvalidRotation(_))
        ));
        let reflection = Mat3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matrix_to_rot6d(&reflection).is_err());
    }

    #[test]
    fn rot6d_round_trip_random() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(100);
        for _ in 0..1000 {
            let r = random_rotation(&mut rng);
            let back = rot6d_to_matrix(&matrix_to_rot6d(&r).unwrap()).unwrap();
            assert!((back - r).norm() < 1e-9);
        }
    }

    #[test]
    fn difference_identities() {
        let r = rot_z(0.3) * rot_x(1.1);
        assert!((rotation_difference(&r, &r) - Mat3::identity()).abs().max() < 1e-12);
        let z = rot_z(FRAC_PI_2);
        assert_eq!(rotation_difference(&z, &Mat3::identity()), z);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let r1 = random_rotation(&mut rng);
            let r2 = random_rotation(&mut rng);
            let d = rotation_difference(&(r1 * r2), &r2);
            assert!((d - r1).norm() < 1e-9);
            assert!((rotation_difference(&r1, &r2) * r2 - r1).norm() < 1e-9);
        }
    }

    #[test]
    fn slerp_fraction() {
        let m = slerp(&Mat3::identity(), &rot_z(FRAC_PI_2), 0.4);
        assert!((m - rot_z(0.4 * FRAC_PI_2)).abs().max() < 1e-12);
        assert!((rotation_angle(&m) - 36f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn log_exp_inverse() {
        let v = Vec3::new(0.3, -0.2, 0.9);
        assert!((log_map(&exp_map(&v)) - v).norm() < 1e-12);
        assert!((geodesic_distance(&rot_z(0.5), &rot_z(0.2)) - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn decoded_matrices_are_rotations(v in proptest::array::uniform6(-5.0f64..5.0)) {
            if let Ok(m) = rot6d_to_matrix(&v) {
                prop_assert!(is_rotation(&m, 1e-9));
            }
        }
    }
}
