//! Pinhole cameras in the OpenCV convention: camera x right, y down, z
//! forward. Pixel `(i, j)` has its center at image coordinates `(i, j)`.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::is_rotation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// World-to-camera rotation, row-major.
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    /// World-to-camera translation.
    pub t: [f64; 3],
    pub near: f64,
    pub far: f64,
}

impl Camera {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        rotation: &Matrix3<f64>,
        translation: &Vector3<f64>,
    ) -> Result<Self> {
        let mut r = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                r[row * 3 + col] = rotation[(row, col)];
            }
        }
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            rotation: r,
            t: [translation.x, translation.y, translation.z],
            near: 0.01,
            far: 100.0,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target` with world `up` pointing up in the image.
    /// Falls back to +z as the up hint when the view direction is parallel to `up`.
    pub fn look_at(
        eye: &Vector3<f64>,
        target: &Vector3<f64>,
        up: &Vector3<f64>,
        fx: f64,
        fy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Domain("eye coincides with target".into()))?;
        let right = forward
            .cross(up)
            .try_normalize(1e-9)
            .or_else(|| forward.cross(&Vector3::z()).try_normalize(1e-9))
            .ok_or_else(|| Error::Domain("degenerate look-at".into()))?;
        let down = forward.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let t = -(r * eye);
        Self::new(fx, fy, width as f64 / 2.0, height as f64 / 2.0, width, height, &r, &t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("camera", "focal lengths must be positive"));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return Err(Error::invalid("camera", "require 0 < near < far"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera", "empty image size"));
        }
        if !is_rotation(&self.rotation_matrix(), 1e-9) {
            return Err(Error::invalid("camera", "rotation is not orthonormal"));
        }
        if self.t.iter().chain([&self.cx, &self.cy]).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("camera parameters".into()));
        }
        Ok(())
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_row_slice(&self.rotation)
    }

    pub fn translation(&self) -> Vector3<f64> {
        Vector3::from(self.t)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation_matrix().transpose() * self.translation())
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * p + self.translation()
    }

    /// Pixel coordinates of a camera-space point with positive depth.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> [f64; 2] {
        [self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy]
    }

    /// Unit world-space ray direction through pixel coordinates `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let d = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        (self.rotation_matrix().transpose() * d).normalize()
    }

    /// Same pose and field of view at another resolution.
    pub fn resized(&self, width: u32, height: u32) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
            ..self.clone()
        }
    }

    /// The camera after moving the world by `x ↦ R x + t`, so that the
    /// moved scene looks identical from it.
    pub fn follow_rigid(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> Result<Self> {
        let r_wc = self.rotation_matrix() * rotation.transpose();
        let t_wc = self.translation() - r_wc * translation;
        let mut cam = Self::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height, &r_wc, &t_wc)?;
        cam.near = self.near;
        cam.far = self.far;
        Ok(cam)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("camera serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cam: Camera = serde_json::from_str(&text)?;
        cam.validate()?;
        Ok(cam)
    }
}
