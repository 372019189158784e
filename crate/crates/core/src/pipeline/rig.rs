//! Ring-based camera rigs around a standing subject.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::Camera;

/// `count` cameras at one elevation, evenly spaced in azimuth starting at
/// `azimuth_offset_deg` (0° looks from +x, 90° from +z).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub elevation_deg: f64,
    pub count: usize,
    pub radius: f64,
    pub target: [f64; 3],
    #[serde(default)]
    pub azimuth_offset_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraRigSpec {
    pub rings: Vec<RingSpec>,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
}

pub const DEFAULT_RADIUS: f64 = 2.5;
pub const DEFAULT_TARGET: [f64; 3] = [0.0, 0.9, 0.0];
pub const DEFAULT_IMAGE_SIZE: u32 = 512;
pub const DEFAULT_FOCAL: f64 = 560.0;

impl Default for CameraRigSpec {
    /// 30 horizontal views every 12°, then 10 views every 36° at each of
    /// +20°, +40°, +60° and the mirrored downward elevations.
    fn default() -> Self {
        let ring = |elevation_deg: f64, count: usize| RingSpec {
            elevation_deg,
            count,
            radius: DEFAULT_RADIUS,
            target: DEFAULT_TARGET,
            azimuth_offset_deg: 0.0,
        };
        let mut rings = vec![ring(0.0, 30)];
        rings.extend([20.0, 40.0, 60.0].map(|e| ring(e, 10)));
        rings.extend([-20.0, -40.0, -60.0].map(|e| ring(e, 10)));
        Self {
            rings,
            width: DEFAULT_IMAGE_SIZE,
            height: DEFAULT_IMAGE_SIZE,
            fx: DEFAULT_FOCAL,
            fy: DEFAULT_FOCAL,
        }
    }
}

impl CameraRigSpec {
    /// Only the horizontal ring of the default rig.
    pub fn horizontal(count: usize) -> Self {
        let mut spec = Self::default();
        spec.rings.truncate(1);
        spec.rings[0].count = count;
        spec
    }

    pub fn camera_count(&self) -> usize {
        self.rings.iter().map(|r| r.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("rig spec", "image size and focal lengths must be positive"));
        }
        for (i, r) in self.rings.iter().enumerate() {
            if r.count == 0 || !(r.radius > 0.0) || !r.radius.is_finite() {
                return Err(Error::invalid("rig spec", format!("ring {i}: count and radius must be positive")));
            }
            if !(r.elevation_deg.abs() <= 90.0) || !r.azimuth_offset_deg.is_finite() || r.target.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("rig spec", format!("ring {i}: bad angles or target")));
            }
        }
        Ok(())
    }
}

/// Position on a ring: `target + r (cos e cos a, sin e, cos e sin a)`.
pub fn ring_position(ring: &RingSpec, index: usize) -> Vector3<f64> {
    let az = (ring.azimuth_offset_deg + 360.0 * index as f64 / ring.count as f64).to_radians();
    let el = ring.elevation_deg.to_radians();
    Vector3::from(ring.target) + ring.radius * Vector3::new(el.cos() * az.cos(), el.sin(), el.cos() * az.sin())
}

/// Cameras ring by ring, each looking at its ring target with +y up.
pub fn generate_rig(spec: &CameraRigSpec) -> Result<Vec<Camera>> {
    spec.validate()?;
    let mut cams = Vec::with_capacity(spec.camera_count());
    for ring in &spec.rings {
        let target = Vector3::from(ring.target);
        for k in 0..ring.count {
            let eye = ring_position(ring, k);
            cams.push(Camera::look_at(&eye, &target, &Vector3::y(), spec.fx, spec.fy, spec.width, spec.height)?);
        }
    }
    Ok(cams)
}
