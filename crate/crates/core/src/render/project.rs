//! EWA projection of 3D Gaussians to screen-space splats.

use nalgebra::{Matrix2x3, Matrix3, Vector3};

use super::camera::Camera;
use super::raster::SplatGrads;
use crate::error::{Error, Result};
use crate::gsplat::{GaussianGrads, PosedGaussians};

/// Added to every projected covariance, pixels².
pub const COV2D_BLUR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    pub mean2d: [f64; 2],
    /// Symmetric 2×2 covariance as `[xx, xy, yy]`.
    pub cov2d: [f64; 3],
    pub depth: f64,
    pub color: [f64; 3],
    pub opacity: f64,
    /// Index of the Gaussian this splat came from.
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplatFrame {
    pub splats: Vec<Splat>,
}

impl SplatFrame {
    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }
}

/// Projection Jacobian at camera-space point `t`.
fn jacobian(cam: &Camera, t: &Vector3<f64>) -> Matrix2x3<f64> {
    let (x, y, z) = (t.x, t.y, t.z);
    Matrix2x3::new(
        cam.fx / z,
        0.0,
        -cam.fx * x / (z * z),
        0.0,
        cam.fy / z,
        -cam.fy * y / (z * z),
    )
}

/// Splats for every Gaussian whose camera depth lies strictly inside `(near, far)`.
pub fn project_gaussians(g: &PosedGaussians, camera: &Camera) -> SplatFrame {
    let w = camera.rotation_matrix();
    let tw = camera.translation();
    let mut splats = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let t = w * g.positions[i] + tw;
        if !(t.z > camera.near && t.z < camera.far) {
            continue;
        }
        let m = jacobian(camera, &t) * w;
        let c = m * g.covariance(i) * m.transpose();
        splats.push(Splat {
            mean2d: camera.project_camera_point(&t),
            cov2d: [c[(0, 0)] + COV2D_BLUR, 0.5 * (c[(0, 1)] + c[(1, 0)]), c[(1, 1)] + COV2D_BLUR],
            depth: t.z,
            color: [g.colors[i].x, g.colors[i].y, g.colors[i].z],
            opacity: g.opacities[i],
            source: i,
        });
    }
    SplatFrame { splats }
}

/// Chains splat gradients to world-space position, covariance, color and opacity.
pub fn project_backward(
    g: &PosedGaussians,
    camera: &Camera,
    frame: &SplatFrame,
    grads: &SplatGrads,
) -> Result<GaussianGrads> {
    if grads.len() != frame.len() {
        return Err(Error::Dimension(format!(
            "{} splat gradients for {} splats",
            grads.len(),
            frame.len()
        )));
    }
    let w = camera.rotation_matrix();
    let tw = camera.translation();
    let (fx, fy) = (camera.fx, camera.fy);
    let mut out = GaussianGrads::zeros(g.len());
    for (s, splat) in frame.splats.iter().enumerate() {
        let i = splat.source;
        if i >= g.len() {
            return Err(Error::Index(format!("splat source {i} >= {}", g.len())));
        }
        let t = w * g.positions[i] + tw;
        let (x, y, z) = (t.x, t.y, t.z);
        let j = jacobian(camera, &t);
        let m = j * w;
        let sigma = g.covariance(i);
        let [ga, gb, gc] = grads.cov2d[s];
        let g2 = nalgebra::Matrix2::new(ga, 0.5 * gb, 0.5 * gb, gc);

        out.covariance[i] = m.transpose() * g2 * m;
        let dm = 2.0 * g2 * m * sigma;
        let dj = dm * w.transpose();

        let [du, dv] = grads.mean2d[s];
        let z2 = z * z;
        let z3 = z2 * z;
        let dt = Vector3::new(
            dj[(0, 2)] * (-fx / z2) + du * fx / z,
            dj[(1, 2)] * (-fy / z2) + dv * fy / z,
            dj[(0, 0)] * (-fx / z2)
                + dj[(0, 2)] * (2.0 * fx * x / z3)
                + dj[(1, 1)] * (-fy / z2)
                + dj[(1, 2)] * (2.0 * fy * y / z3)
                + du * (-fx * x / z2)
                + dv * (-fy * y / z2),
        );
        out.position[i] = w.transpose() * dt;
        out.color[i] = Vector3::from(grads.color[s]);
        out.opacity[i] = grads.opacity[s];
    }
    Ok(out)
}

/// World covariance → symmetric 2×2 `[xx, xy, yy]` (before blur), for tests and tools.
pub fn projected_covariance(camera: &Camera, position: &Vector3<f64>, cov: &Matrix3<f64>) -> [f64; 3] {
    let w = camera.rotation_matrix();
    let t = w * position + camera.translation();
    let m = jacobian(camera, &t) * w;
    let c = m * cov * m.transpose();
    [c[(0, 0)], c[(0, 1)], c[(1, 1)]]
}
