use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::gaussians::{CanonicalGaussians, GaussianGrads, PosedGaussians};
use crate::body::{blended_transform, blended_transform_orthonormalized, JointTransforms};
use crate::error::{Error, Result};
use crate::math::{is_rotation, polar_rotation, quat_to_matrix, quat_to_wxyz};

#[derive(Debug, Clone, Copy, Default)]
pub struct PoseOptions {
    /// Replace each blended 3×3 block by its polar rotation before use.
    pub orthonormalize_blend: bool,
}

fn blend(
    g: &CanonicalGaussians,
    i: usize,
    transforms: &JointTransforms,
    options: PoseOptions,
) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let t = if options.orthonormalize_blend {
        blended_transform_orthonormalized(&g.skin_weights[i], transforms)?
    } else {
        blended_transform(&g.skin_weights[i], transforms)?
    };
    Ok((t.fixed_view::<3, 3>(0, 0).into_owned(), t.fixed_view::<3, 1>(0, 3).into_owned()))
}

pub fn pose_gaussians(g: &CanonicalGaussians, transforms: &JointTransforms) -> Result<PosedGaussians> {
    pose_gaussians_with(g, transforms, PoseOptions::default())
}

/// Positions follow `Σ w_i B_i μ̄`; the covariance factor is `T₃ₓ₃ R`.
pub fn pose_gaussians_with(
    g: &CanonicalGaussians,
    transforms: &JointTransforms,
    options: PoseOptions,
) -> Result<PosedGaussians> {
    if g.skin_weights.len() != g.len() {
        return Err(Error::Dimension("canonical gaussians lack skin weights".into()));
    }
    let mut out = PosedGaussians {
        positions: Vec::with_capacity(g.len()),
        scales: g.scales.clone(),
        rotations: Vec::with_capacity(g.len()),
        opacities: g.opacities.clone(),
        colors: g.colors.clone(),
        cov_factors: Vec::with_capacity(g.len()),
    };
    for i in 0..g.len() {
        let (lin, trans) = blend(g, i, transforms, options)?;
        out.positions.push(lin * g.positions[i] + trans);
        let r = quat_to_matrix(quat_to_wxyz(&g.rotations[i]));
        let factor = lin * r;
        let rotation = if is_rotation(&lin, 1e-12) {
            UnitQuaternion::from_matrix(&lin) * g.rotations[i]
        } else {
            UnitQuaternion::from_matrix(&polar_rotation(&factor))
        };
        out.rotations.push(rotation);
        out.cov_factors.push(factor);
    }
    Ok(out)
}

/// Pulls posed-space gradients back to canonical space:
/// `∂L/∂μ̄ = Tᵀ ∂L/∂μ′` and `∂L/∂Σ = Tᵀ (∂L/∂Σ′) T`.
pub fn pose_backward(
    g: &CanonicalGaussians,
    transforms: &JointTransforms,
    posed: &GaussianGrads,
) -> Result<GaussianGrads> {
    pose_backward_with(g, transforms, posed, PoseOptions::default())
}

pub fn pose_backward_with(
    g: &CanonicalGaussians,
    transforms: &JointTransforms,
    posed: &GaussianGrads,
    options: PoseOptions,
) -> Result<GaussianGrads> {
    if posed.len() != g.len() {
        return Err(Error::Dimension(format!(
            "{} gradients for {} gaussians",
            posed.len(),
            g.len()
        )));
    }
    let mut out = GaussianGrads::zeros(g.len());
    for i in 0..g.len() {
        let (lin, _) = blend(g, i, transforms, options)?;
        out.position[i] = lin.transpose() * posed.position[i];
        out.covariance[i] = lin.transpose() * posed.covariance[i] * lin;
        out.opacity[i] = posed.opacity[i];
        out.color[i] = posed.color[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{rigid_matrix, SkinWeights};
    use crate::math::{axis_angle_to_matrix, axis_angle_to_quat};

    fn sample() -> CanonicalGaussians {
        CanonicalGaussians {
            positions: vec![Vector3::new(0.1, 0.2, 0.3), Vector3::new(-0.5, 1.0, 0.2)],
            scales: vec![Vector3::new(0.01, 0.02, 0.03), Vector3::new(0.05, 0.01, 0.01)],
            rotations: vec![
                axis_angle_to_quat(&Vector3::new(0.3, 0.1, -0.2)),
                axis_angle_to_quat(&Vector3::new(-1.0, 0.4, 0.6)),
            ],
            opacities: vec![0.3, 0.8],
            colors: vec![Vector3::new(0.1, 0.5, 0.9), Vector3::new(0.7, 0.2, 0.4)],
            skin_weights: vec![
                SkinWeights::single(0),
                SkinWeights::from_pairs([(0, 0.4), (1, 0.6)]).unwrap(),
            ],
        }
    }

    #[test]
    fn identity_transforms_leave_fields_unchanged() {
        let g = sample();
        let p = pose_gaussians(&g, &JointTransforms::identity(2)).unwrap();
        assert_eq!(p.positions, g.positions);
        assert_eq!(p.rotations, g.rotations);
        assert_eq!(p.scales, g.scales);
        assert_eq!(p.opacities, g.opacities);
        assert_eq!(p.colors, g.colors);
    }

    #[test]
    fn rigid_rotation_rotates_everything() {
        let g = sample();
        let r = axis_angle_to_matrix(&Vector3::new(0.2, -0.7, 0.4));
        let p = pose_gaussians(&g, &JointTransforms::uniform(2, &r, &Vector3::zeros())).unwrap();
        for i in 0..g.len() {
            assert!((p.positions[i] - r * g.positions[i]).norm() < 1e-12);
            // rigid-motion covariance oracle
            let expected = r * g.covariance(i) * r.transpose();
            assert!((p.covariance(i) - expected).abs().max() < 1e-15);
            let rq = quat_to_matrix(quat_to_wxyz(&p.rotations[i]));
            let er = r * quat_to_matrix(quat_to_wxyz(&g.rotations[i]));
            assert!((rq - er).abs().max() < 1e-12);
        }
    }

    #[test]
    fn translated_joint_shifts_position_only() {
        let mut g = sample();
        g.skin_weights[0] = SkinWeights::single(1);
        let shift = Vector3::new(0.0, 0.5, -0.25);
        let transforms = JointTransforms(vec![
            nalgebra::Matrix4::identity(),
            rigid_matrix(&Matrix3::identity(), &shift),
        ]);
        let p = pose_gaussians(&g, &transforms).unwrap();
        assert!((p.positions[0] - (g.positions[0] + shift)).norm() < 1e-15);
        assert_eq!(p.rotations[0], g.rotations[0]);
    }

    #[test]
    fn blended_factor_is_not_orthonormal_but_rotation_is() {
        let mut g = sample();
        g.skin_weights[0] = SkinWeights::from_pairs([(0, 0.5), (1, 0.5)]).unwrap();
        let transforms = JointTransforms(vec![
            nalgebra::Matrix4::identity(),
            rigid_matrix(&axis_angle_to_matrix(&Vector3::new(0.0, 0.0, 1.2)), &Vector3::zeros()),
        ]);
        let p = pose_gaussians(&g, &transforms).unwrap();
        assert!(!is_rotation(&p.cov_factors[0], 1e-6));
        let q = p.rotations[0];
        assert!((q.norm() - 1.0).abs() < 1e-12);
        let ortho = pose_gaussians_with(&g, &transforms, PoseOptions { orthonormalize_blend: true }).unwrap();
        assert!(is_rotation(&ortho.cov_factors[0], 1e-9));
    }
}
