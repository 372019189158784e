//! Cameras, Plücker rays, EWA projection and the differentiable rasterizer.

mod camera;
mod image;
mod plucker;
mod project;
mod raster;

pub use camera::Camera;
pub use image::{Image, ImageBuffer, ImageF64};
pub use plucker::{plucker_embedding, PluckerGrid};
pub use project::{project_backward, project_gaussians, projected_covariance, Splat, SplatFrame, COV2D_BLUR};
pub use raster::{
    rasterize, rasterize_backward, rasterize_with_state, RasterDiagnostics, RasterOutput, RasterState, SplatGrads,
    ALPHA_MAX, ALPHA_MIN, DEPTH_QUANTUM, TILE_SIZE, TRANSMITTANCE_MIN,
};

use crate::error::Result;
use crate::gsplat::{GaussianGrads, PosedGaussians};

/// White, matching renders on a white canvas.
pub const DEFAULT_BACKGROUND: [f64; 3] = [1.0, 1.0, 1.0];

/// Projects and rasterizes a Gaussian set.
pub fn render(g: &PosedGaussians, camera: &Camera, background: [f64; 3]) -> (SplatFrame, RasterOutput) {
    let frame = project_gaussians(g, camera);
    let out = rasterize_with_state(&frame, camera, background);
    (frame, out)
}

/// Full backward pass from an RGBA image gradient to world-space Gaussian gradients.
pub fn render_backward(
    g: &PosedGaussians,
    camera: &Camera,
    frame: &SplatFrame,
    state: &RasterState,
    upstream: &ImageF64,
) -> Result<GaussianGrads> {
    let splat_grads = rasterize_backward(frame, state, upstream)?;
    project_backward(g, camera, frame, &splat_grads)
}
