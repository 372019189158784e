//! Moving assets to the shared origin frame.

use nalgebra::Vector3;

use crate::gsplat::RigidMotion;
use crate::math::axis_angle_to_matrix;

/// Undoes a root transform: `μ ← Rᵀ(μ − t)` and rotations left-multiplied by `Rᵀ`.
pub fn canonicalize<G: RigidMotion + Clone>(g: &G, root_rotation: [f64; 3], root_translation: [f64; 3]) -> G {
    let r = axis_angle_to_matrix(&Vector3::from(root_rotation));
    let rt = r.transpose();
    let mut out = g.clone();
    out.apply_rigid(&rt, &(-(rt * Vector3::from(root_translation))));
    out
}

/// Applies a root transform: `μ ← R μ + t`. Inverse of [`canonicalize`].
pub fn decanonicalize<G: RigidMotion + Clone>(g: &G, root_rotation: [f64; 3], root_translation: [f64; 3]) -> G {
    let r = axis_angle_to_matrix(&Vector3::from(root_rotation));
    let mut out = g.clone();
    out.apply_rigid(&r, &Vector3::from(root_translation));
    out
}
