use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::body::SkinWeights;
use crate::error::{Error, Result};
use crate::math::{quat_to_matrix, quat_to_wxyz};

/// T-pose Gaussians with activated attributes and skinning weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CanonicalGaussians {
    pub positions: Vec<Vector3<f64>>,
    pub scales: Vec<Vector3<f64>>,
    pub rotations: Vec<UnitQuaternion<f64>>,
    pub opacities: Vec<f64>,
    pub colors: Vec<Vector3<f64>>,
    pub skin_weights: Vec<SkinWeights>,
}

/// World-space Gaussians.
///
/// `cov_factors[i]` is the linear factor `M` of the covariance
/// `M diag(s)² Mᵀ`. After rigid motions it equals the rotation of
/// `rotations[i]`; after blended skinning it is `T₃ₓ₃ R`, which need not be
/// orthonormal, while `rotations[i]` holds its closest rotation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosedGaussians {
    pub positions: Vec<Vector3<f64>>,
    pub scales: Vec<Vector3<f64>>,
    pub rotations: Vec<UnitQuaternion<f64>>,
    pub opacities: Vec<f64>,
    pub colors: Vec<Vector3<f64>>,
    pub cov_factors: Vec<Matrix3<f64>>,
}

impl CanonicalGaussians {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn covariance(&self, i: usize) -> Matrix3<f64> {
        covariance_unchecked(&self.scales[i], &quat_to_matrix(quat_to_wxyz(&self.rotations[i])))
    }

    /// World-space copy without posing.
    pub fn to_posed(&self) -> PosedGaussians {
        PosedGaussians {
            positions: self.positions.clone(),
            scales: self.scales.clone(),
            rotations: self.rotations.clone(),
            opacities: self.opacities.clone(),
            colors: self.colors.clone(),
            cov_factors: self
                .rotations
                .iter()
                .map(|q| quat_to_matrix(quat_to_wxyz(q)))
                .collect(),
        }
    }
}

impl PosedGaussians {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn covariance(&self, i: usize) -> Matrix3<f64> {
        covariance_unchecked(&self.scales[i], &self.cov_factors[i])
    }

    /// Builds a set from rotations alone (covariance factors follow them).
    pub fn from_attributes(
        positions: Vec<Vector3<f64>>,
        scales: Vec<Vector3<f64>>,
        rotations: Vec<UnitQuaternion<f64>>,
        opacities: Vec<f64>,
        colors: Vec<Vector3<f64>>,
    ) -> Result<Self> {
        let n = positions.len();
        if scales.len() != n || rotations.len() != n || opacities.len() != n || colors.len() != n {
            return Err(Error::Dimension("gaussian attribute arrays differ in length".into()));
        }
        let cov_factors = rotations.iter().map(|q| quat_to_matrix(quat_to_wxyz(q))).collect();
        Ok(Self {
            positions,
            scales,
            rotations,
            opacities,
            colors,
            cov_factors,
        })
    }
}

/// Rigid motion `x ↦ R x + t` applied to a Gaussian set.
pub trait RigidMotion {
    fn apply_rigid(&mut self, rotation: &Matrix3<f64>, translation: &Vector3<f64>);
}

impl RigidMotion for CanonicalGaussians {
    fn apply_rigid(&mut self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) {
        let q = UnitQuaternion::from_matrix(rotation);
        for p in &mut self.positions {
            *p = rotation * *p + translation;
        }
        for r in &mut self.rotations {
            *r = q * *r;
        }
    }
}

impl RigidMotion for PosedGaussians {
    fn apply_rigid(&mut self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) {
        let q = UnitQuaternion::from_matrix(rotation);
        for p in &mut self.positions {
            *p = rotation * *p + translation;
        }
        for r in &mut self.rotations {
            *r = q * *r;
        }
        for f in &mut self.cov_factors {
            *f = rotation * *f;
        }
    }
}

pub(crate) fn covariance_unchecked(scale: &Vector3<f64>, factor: &Matrix3<f64>) -> Matrix3<f64> {
    let d = Matrix3::from_diagonal(&scale.component_mul(scale));
    factor * d * factor.transpose()
}

/// `R diag(s)² Rᵀ`.
pub fn covariance(scale: &Vector3<f64>, rotation: &UnitQuaternion<f64>) -> Result<Matrix3<f64>> {
    if scale.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Domain(format!("non-positive scale {scale:?}")));
    }
    Ok(covariance_unchecked(scale, &quat_to_matrix(quat_to_wxyz(rotation))))
}

/// Gradients of `Σ = M diag(s)² Mᵀ` given `∂L/∂Σ` (entrywise partials).
/// Returns `(∂L/∂s, ∂L/∂M)`.
pub fn covariance_backward(
    scale: &Vector3<f64>,
    factor: &Matrix3<f64>,
    grad_cov: &Matrix3<f64>,
) -> (Vector3<f64>, Matrix3<f64>) {
    let d = Matrix3::from_diagonal(&scale.component_mul(scale));
    let g = grad_cov + grad_cov.transpose();
    let d_factor = g * factor * d;
    let inner = factor.transpose() * grad_cov * factor;
    let d_scale = Vector3::new(
        2.0 * scale.x * inner[(0, 0)],
        2.0 * scale.y * inner[(1, 1)],
        2.0 * scale.z * inner[(2, 2)],
    );
    (d_scale, d_factor)
}

/// Per-Gaussian gradients at the covariance level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianGrads {
    pub position: Vec<Vector3<f64>>,
    /// Entrywise `∂L/∂Σ` (symmetric).
    pub covariance: Vec<Matrix3<f64>>,
    /// With respect to the activated opacity.
    pub opacity: Vec<f64>,
    /// With respect to the activated color.
    pub color: Vec<Vector3<f64>>,
}

impl GaussianGrads {
    pub fn zeros(n: usize) -> Self {
        Self {
            position: vec![Vector3::zeros(); n],
            covariance: vec![Matrix3::zeros(); n],
            opacity: vec![0.0; n],
            color: vec![Vector3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn add_assign(&mut self, other: &GaussianGrads) {
        for (a, b) in self.position.iter_mut().zip(&other.position) {
            *a += b;
        }
        for (a, b) in self.covariance.iter_mut().zip(&other.covariance) {
            *a += b;
        }
        for (a, b) in self.opacity.iter_mut().zip(&other.opacity) {
            *a += b;
        }
        for (a, b) in self.color.iter_mut().zip(&other.color) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::axis_angle_to_quat;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn covariance_examples() {
        let id = UnitQuaternion::identity();
        assert_eq!(covariance(&Vector3::new(1.0, 1.0, 1.0), &id).unwrap(), Matrix3::identity());
        assert_eq!(
            covariance(&Vector3::new(2.0, 1.0, 1.0), &id).unwrap(),
            Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0))
        );
        let rz = axis_angle_to_quat(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        let c = covariance(&Vector3::new(2.0, 1.0, 1.0), &rz).unwrap();
        // conjugation oracle: R diag(4,1,1) Rᵀ with R the explicit quarter turn
        let r = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let oracle = r * Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0)) * r.transpose();
        assert!((c - oracle).abs().max() < 1e-14);
        assert!((c - Matrix3::from_diagonal(&Vector3::new(1.0, 4.0, 1.0))).abs().max() < 1e-14);
    }

    #[test]
    fn covariance_rejects_non_positive_scale() {
        let id = UnitQuaternion::identity();
        assert!(matches!(covariance(&Vector3::new(1.0, 0.0, 1.0), &id), Err(Error::Domain(_))));
        assert!(matches!(covariance(&Vector3::new(1.0, -2.0, 1.0), &id), Err(Error::Domain(_))));
    }

    #[test]
    fn covariance_backward_matches_finite_differences() {
        let s = Vector3::new(0.3, 0.7, 1.2);
        let m = crate::math::axis_angle_to_matrix(&Vector3::new(0.3, -0.4, 0.9)) * 1.1;
        let g = Matrix3::new(0.5, 0.2, -0.1, 0.2, -0.3, 0.4, -0.1, 0.4, 0.8);
        let loss = |s: &Vector3<f64>, m: &Matrix3<f64>| covariance_unchecked(s, m).component_mul(&g).sum();
        let (ds, dm) = covariance_backward(&s, &m, &g);
        let h = 1e-6;
        for i in 0..3 {
            let mut sp = s;
            let mut sm = s;
            sp[i] += h;
            sm[i] -= h;
            let fd = (loss(&sp, &m) - loss(&sm, &m)) / (2.0 * h);
            assert!((fd - ds[i]).abs() < 1e-7);
        }
        for i in 0..9 {
            let mut mp = m;
            let mut mm = m;
            mp[i] += h;
            mm[i] -= h;
            let fd = (loss(&s, &mp) - loss(&s, &mm)) / (2.0 * h);
            assert!((fd - dm[i]).abs() < 1e-7);
        }
    }
}
