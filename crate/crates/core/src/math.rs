//! Small rotation and activation helpers shared by the geometry modules.
//!
//! Quaternions are stored as `[w, x, y, z]` when flattened.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

/// Below this angle axis-angle conversions switch to their Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-8;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula, second-order expansion near zero.
pub fn axis_angle_to_matrix(r: &Vector3<f64>) -> Matrix3<f64> {
    let theta = r.norm();
    let k = skew(r);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * k * k
}

/// `sin(θ/2)/θ` and its derivative divided by θ, both smooth through zero.
fn half_sinc_terms(theta: f64) -> (f64, f64) {
    if theta < 1e-3 {
        let t2 = theta * theta;
        (0.5 - t2 / 48.0, -1.0 / 24.0 + t2 / 960.0)
    } else {
        let (s, c) = (0.5 * theta).sin_cos();
        let k = s / theta;
        let dk_over_theta = (0.5 * theta * c - s) / (theta * theta * theta);
        (k, dk_over_theta)
    }
}

pub fn axis_angle_to_quat(r: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = r.norm();
    let (k, _) = half_sinc_terms(theta);
    let w = (0.5 * theta).cos();
    UnitQuaternion::new_normalize(Quaternion::new(w, k * r.x, k * r.y, k * r.z))
}

/// Axis-angle vector of a unit quaternion (shortest rotation).
pub fn quat_to_axis_angle(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    q.scaled_axis()
}

pub fn quat_to_wxyz(q: &UnitQuaternion<f64>) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

pub fn quat_from_wxyz(q: [f64; 4]) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(Quaternion::new(q[0], q[1], q[2], q[3]))
}

/// Rotation matrix of a unit quaternion written as a polynomial in its components.
pub fn quat_to_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Partial derivatives of [`quat_to_matrix`] with respect to `w, x, y, z`.
pub fn quat_matrix_jacobian(q: [f64; 4]) -> [Matrix3<f64>; 4] {
    let [w, x, y, z] = q;
    let two = 2.0;
    [
        Matrix3::new(0.0, -two * z, two * y, two * z, 0.0, -two * x, -two * y, two * x, 0.0),
        Matrix3::new(0.0, two * y, two * z, two * y, -4.0 * x, -two * w, two * z, two * w, -4.0 * x),
        Matrix3::new(-4.0 * y, two * x, two * w, two * x, 0.0, two * z, -two * w, two * z, -4.0 * y),
        Matrix3::new(-4.0 * z, -two * w, two * x, two * w, -4.0 * z, two * y, two * x, two * y, 0.0),
    ]
}

/// Quaternion of an axis-angle vector together with `d q_k / d r_i` stored as `[k][i]`.
pub fn axis_angle_quat_jacobian(r: &Vector3<f64>) -> ([f64; 4], [[f64; 3]; 4]) {
    let theta = r.norm();
    let (k, dk) = half_sinc_terms(theta);
    let w = (0.5 * theta).cos();
    let q = [w, k * r.x, k * r.y, k * r.z];
    let mut jac = [[0.0; 3]; 4];
    for i in 0..3 {
        // d cos(θ/2) / d r_i = -sin(θ/2)/2 · r_i/θ = -(k/2) r_i
        jac[0][i] = -0.5 * k * r[i];
        for j in 0..3 {
            let delta = if i == j { k } else { 0.0 };
            jac[j + 1][i] = delta + dk * r[i] * r[j];
        }
    }
    (q, jac)
}

/// `d R / d r_i` for the rotation matrix of an axis-angle vector.
pub fn axis_angle_matrix_jacobian(r: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (q, dq) = axis_angle_quat_jacobian(r);
    let dr = quat_matrix_jacobian(q);
    let mut out = [Matrix3::zeros(); 3];
    for (i, o) in out.iter_mut().enumerate() {
        for k in 0..4 {
            *o += dr[k] * dq[k][i];
        }
    }
    out
}

/// Closest rotation to `m` in the Frobenius sense (polar decomposition).
pub fn polar_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (Some(mut u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix3::identity();
    };
    if (u * v_t).determinant() < 0.0 {
        // flip the axis of the smallest singular value
        let idx = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(2);
        u.column_mut(idx).neg_mut();
    }
    u * v_t
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`sigmoid`]; the argument is clamped into `[1e-6, 1 - 1e-6]`.
pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-6, 1.0 - 1e-6);
    (p / (1.0 - p)).ln()
}

pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    let should_be_identity = m.transpose() * m;
    (should_be_identity - Matrix3::identity()).abs().max() <= tol
        && (m.determinant() - 1.0).abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rodrigues_matches_quaternion_route() {
        let r = Vector3::new(0.3, -1.1, 0.7);
        let a = axis_angle_to_matrix(&r);
        let b = quat_to_matrix(quat_to_wxyz(&axis_angle_to_quat(&r)));
        assert!((a - b).abs().max() < 1e-14);
        assert!(is_rotation(&a, 1e-12));
    }

    #[test]
    fn quarter_turn_about_z() {
        let m = axis_angle_to_matrix(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let x = m * Vector3::x();
        assert!((x - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn tiny_angle_expansion_is_continuous() {
        let r = Vector3::new(0.6e-8, -0.3e-8, 0.5e-8);
        let series = axis_angle_to_matrix(&r);
        let theta = r.norm();
        let k = skew(&r);
        let closed = Matrix3::identity() + theta.sin() / theta * k + (1.0 - theta.cos()) / (theta * theta) * k * k;
        assert!((series - closed).abs().max() < 1e-15);
        assert_eq!(axis_angle_to_matrix(&Vector3::zeros()), Matrix3::identity());
    }

    #[test]
    fn matrix_jacobian_matches_central_differences() {
        for r in [
            Vector3::new(0.4, -0.2, 1.3),
            Vector3::new(1e-5, 2e-5, -1e-5),
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(2.5, 0.1, -0.4),
        ] {
            let jac = axis_angle_matrix_jacobian(&r);
            let h = 1e-6;
            for (i, analytic) in jac.iter().enumerate() {
                let mut rp = r;
                let mut rm = r;
                rp[i] += h;
                rm[i] -= h;
                let fd = (axis_angle_to_matrix(&rp) - axis_angle_to_matrix(&rm)) / (2.0 * h);
                assert!((fd - analytic).abs().max() < 1e-8, "r={r:?} i={i}");
            }
        }
    }

    #[test]
    fn polar_of_scaled_rotation_recovers_rotation() {
        let rot = axis_angle_to_matrix(&Vector3::new(0.2, 0.5, -0.3));
        let m = 0.7 * rot;
        assert!((polar_rotation(&m) - rot).abs().max() < 1e-12);
    }

    #[test]
    fn sigmoid_logit_round_trip() {
        for x in [-5.0, -0.3, 0.0, 0.8, 4.0] {
            assert!((logit(sigmoid(x)) - x).abs() < 1e-9);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
