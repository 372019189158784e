//! Skinned body template, forward kinematics and linear blend skinning.
//!
//! Joints rotate about their rest positions, so the all-zero [`Pose`] maps
//! every joint to the identity transform. The root additionally carries a
//! global rigid motion `x ↦ R x + t` about the world origin.

mod io;
mod procedural;

pub use procedural::{procedural_humanoid, HumanoidParams};

use arrayvec::ArrayVec;
use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{axis_angle_to_matrix, polar_rotation};

/// Tolerance for per-vertex weight sums.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;
/// Maximum number of joint influences per vertex.
pub const MAX_INFLUENCES: usize = 4;

/// Sparse skinning weights, at most [`MAX_INFLUENCES`] `(joint, weight)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkinWeights(ArrayVec<(usize, f64), MAX_INFLUENCES>);

impl SkinWeights {
    pub fn single(joint: usize) -> Self {
        let mut v = ArrayVec::new();
        v.push((joint, 1.0));
        Self(v)
    }

    /// Builds weights from arbitrary pairs: merges duplicate joints, drops
    /// non-positive entries, keeps the largest four and renormalizes.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (j, w) in pairs {
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("skin weight for joint {j}")));
            }
            if w <= 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(mj, _)| *mj == j) {
                Some(entry) => entry.1 += w,
                None => merged.push((j, w)),
            }
        }
        merged.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        merged.truncate(MAX_INFLUENCES);
        let total: f64 = merged.iter().map(|(_, w)| w).sum();
        if merged.is_empty() || total <= 0.0 {
            return Err(Error::Domain("skin weights are empty".into()));
        }
        Ok(Self(merged.into_iter().map(|(j, w)| (j, w / total)).collect()))
    }

    /// Wraps pairs verbatim; the caller guarantees the invariants.
    pub fn from_raw(pairs: &[(usize, f64)]) -> Result<Self> {
        if pairs.len() > MAX_INFLUENCES {
            return Err(Error::Domain(format!(
                "{} influences exceed the limit of {MAX_INFLUENCES}",
                pairs.len()
            )));
        }
        Ok(Self(pairs.iter().copied().collect()))
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().map(|(_, w)| w).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn validate(&self, joint_count: usize) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::Domain("empty skin weight list".into()));
        }
        for &(j, w) in &self.0 {
            if j >= joint_count {
                return Err(Error::Index(format!(
                    "skin weight joint {j} >= joint count {joint_count}"
                )));
            }
            if !(w >= 0.0) {
                return Err(Error::Domain(format!("negative skin weight {w}")));
            }
        }
        if (self.sum() - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::Domain(format!("skin weights sum to {}", self.sum())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub rest_position: [f64; 3],
    pub parent: Option<usize>,
}

impl Joint {
    pub fn rest(&self) -> Vector3<f64> {
        Vector3::from(self.rest_position)
    }
}

/// Rest-pose mesh with joint hierarchy, skinning weights and a UV atlas.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinnedTemplate {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[u32; 3]>,
    uv_coords: Vec<[[f64; 2]; 3]>,
    joints: Vec<Joint>,
    skin_weights: Vec<SkinWeights>,
}

impl SkinnedTemplate {
    pub fn new(
        vertices: Vec<Vector3<f64>>,
        faces: Vec<[u32; 3]>,
        uv_coords: Vec<[[f64; 2]; 3]>,
        joints: Vec<Joint>,
        skin_weights: Vec<SkinWeights>,
    ) -> Result<Self> {
        let template = Self {
            vertices,
            faces,
            uv_coords,
            joints,
            skin_weights,
        };
        template.validate()?;
        Ok(template)
    }

    fn validate(&self) -> Result<()> {
        let roots = self.joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 {
            return Err(Error::invalid("template", format!("{roots} root joints")));
        }
        for (i, joint) in self.joints.iter().enumerate() {
            if let Some(p) = joint.parent {
                if p >= i {
                    return Err(Error::invalid(
                        "template",
                        format!("joint {i} has parent {p}; joints must be topologically sorted"),
                    ));
                }
            }
        }
        if self.joints.first().map(|j| j.parent.is_some()).unwrap_or(true) {
            return Err(Error::invalid("template", "joint 0 must be the root"));
        }
        if self.skin_weights.len() != self.vertices.len() {
            return Err(Error::Dimension(format!(
                "{} weight lists for {} vertices",
                self.skin_weights.len(),
                self.vertices.len()
            )));
        }
        for w in &self.skin_weights {
            w.validate(self.joints.len())?;
        }
        if self.uv_coords.len() != self.faces.len() {
            return Err(Error::Dimension(format!(
                "{} uv triples for {} faces",
                self.uv_coords.len(),
                self.faces.len()
            )));
        }
        let n = self.vertices.len() as u32;
        for (f, face) in self.faces.iter().enumerate() {
            if face.iter().any(|&v| v >= n) {
                return Err(Error::Index(format!("face {f} references vertex >= {n}")));
            }
        }
        for uv in self.uv_coords.iter().flatten().flatten() {
            if !(0.0..=1.0).contains(uv) {
                return Err(Error::invalid("template", format!("uv coordinate {uv} outside [0,1]")));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn uv_coords(&self) -> &[[[f64; 2]; 3]] {
        &self.uv_coords
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn skin_weights(&self) -> &[SkinWeights] {
        &self.skin_weights
    }

    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn face_vertices(&self, face: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized outward normal of a face (counter-clockwise winding).
    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.face_vertices(face);
        (b - a).cross(&(c - a))
    }
}

/// Root motion plus per-joint axis-angle rotations, all in radians and meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub root_translation: [f64; 3],
    pub root_rotation: [f64; 3],
    pub joint_rotations: Vec<[f64; 3]>,
}

impl Pose {
    pub fn identity(joint_count: usize) -> Self {
        Self {
            root_translation: [0.0; 3],
            root_rotation: [0.0; 3],
            joint_rotations: vec![[0.0; 3]; joint_count],
        }
    }

    pub fn rigid(joint_count: usize, rotation: [f64; 3], translation: [f64; 3]) -> Self {
        Self {
            root_translation: translation,
            root_rotation: rotation,
            ..Self::identity(joint_count)
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = self
            .joint_rotations
            .iter()
            .chain([&self.root_rotation, &self.root_translation])
            .flatten()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("pose parameters".into()));
        }
        Ok(())
    }
}

/// Per-joint 4×4 rigid transforms from canonical to posed space.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTransforms(pub Vec<Matrix4<f64>>);

impl JointTransforms {
    pub fn identity(joint_count: usize) -> Self {
        Self(vec![Matrix4::identity(); joint_count])
    }

    /// The same rigid transform for every joint.
    pub fn uniform(joint_count: usize, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        Self(vec![rigid_matrix(rotation, translation); joint_count])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, joint: usize) -> Result<&Matrix4<f64>> {
        self.0.get(joint).ok_or_else(|| {
            Error::Index(format!("joint {joint} out of range for {} transforms", self.0.len()))
        })
    }
}

pub fn rigid_matrix(rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(translation);
    m
}

pub fn transform_point(m: &Matrix4<f64>, p: &Vector3<f64>) -> Vector3<f64> {
    m.fixed_view::<3, 3>(0, 0) * p + m.fixed_view::<3, 1>(0, 3)
}

/// Rotation `r` about the pivot point `c`: `x ↦ R (x − c) + c`.
fn rotation_about(r: &Matrix3<f64>, pivot: &Vector3<f64>) -> Matrix4<f64> {
    rigid_matrix(r, &(pivot - r * pivot))
}

pub fn forward_kinematics(template: &SkinnedTemplate, pose: &Pose) -> Result<JointTransforms> {
    if pose.joint_rotations.len() != template.joint_count() {
        return Err(Error::Dimension(format!(
            "pose has {} joint rotations, template has {} joints",
            pose.joint_rotations.len(),
            template.joint_count()
        )));
    }
    pose.validate()?;
    let global = rigid_matrix(
        &axis_angle_to_matrix(&Vector3::from(pose.root_rotation)),
        &Vector3::from(pose.root_translation),
    );
    let mut out: Vec<Matrix4<f64>> = Vec::with_capacity(template.joint_count());
    for (joint, rot) in template.joints().iter().zip(&pose.joint_rotations) {
        let local = rotation_about(&axis_angle_to_matrix(&Vector3::from(*rot)), &joint.rest());
        let parent = match joint.parent {
            Some(p) => out[p],
            None => global,
        };
        out.push(parent * local);
    }
    Ok(JointTransforms(out))
}

/// Σ w_i B_i, without re-orthonormalization.
pub fn blended_transform(weights: &SkinWeights, transforms: &JointTransforms) -> Result<Matrix4<f64>> {
    if weights.is_empty() {
        return Err(Error::Domain("blended transform of an empty weight list".into()));
    }
    let mut t = Matrix4::zeros();
    for &(j, w) in weights.entries() {
        t += transforms.get(j)? * w;
    }
    Ok(t)
}

/// [`blended_transform`] with its 3×3 block replaced by the nearest rotation.
pub fn blended_transform_orthonormalized(
    weights: &SkinWeights,
    transforms: &JointTransforms,
) -> Result<Matrix4<f64>> {
    let mut t = blended_transform(weights, transforms)?;
    let r = polar_rotation(&t.fixed_view::<3, 3>(0, 0).into_owned());
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    Ok(t)
}

pub fn skin_points(
    points: &[Vector3<f64>],
    weights: &[SkinWeights],
    transforms: &JointTransforms,
) -> Result<Vec<Vector3<f64>>> {
    if points.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} points but {} weight lists",
            points.len(),
            weights.len()
        )));
    }
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| {
            let mut acc = Vector3::zeros();
            for &(j, wj) in w.entries() {
                acc += transform_point(transforms.get(j)?, p) * wj;
            }
            Ok(acc)
        })
        .collect()
}

/// Poses every template vertex.
pub fn skin_template(template: &SkinnedTemplate, pose: &Pose) -> Result<Vec<Vector3<f64>>> {
    let transforms = forward_kinematics(template, pose)?;
    skin_points(template.vertices(), template.skin_weights(), &transforms)
}
