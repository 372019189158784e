//! Geometry and generative math for UV-structured 3D human Gaussians.
//!
//! The crate is split along the data flow of an avatar:
//!
//! - [`body`]: skinned template, forward kinematics and linear blend skinning.
//! - [`gsplat`]: UV attribute maps, decoding to canonical Gaussians, posing.
//! - [`render`]: cameras, Plücker rays, EWA projection and a differentiable
//!   tile rasterizer.
//! - [`fit`]: losses, metrics, AdamW and the multi-view UV map fitting loop.
//! - [`pipeline`]: canonicalization, the 90-view camera rig, UV initialization
//!   by back-projection and batch rendering.
//! - [`diffusion`]: noise schedules, v-prediction algebra, guidance, DDIM
//!   sampling, RoPE and RMSNorm.

pub mod body;
pub mod diffusion;
pub mod error;
pub mod fit;
pub mod fixtures;
pub mod gsplat;
pub mod math;
pub mod pipeline;
pub mod render;

mod binio;

pub use error::{Error, Result};
