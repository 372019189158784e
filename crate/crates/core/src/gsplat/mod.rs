//! Gaussian attributes on the UV atlas, decoding against the T-pose
//! template, and posing by linear blend skinning.

mod decode;
mod gaussians;
mod io;
mod pose;
mod uvmap;

pub use decode::{decode_uv, DecodeBasis, BASE_SCALE_RANGE};
pub use gaussians::{
    covariance, covariance_backward, CanonicalGaussians, GaussianGrads, PosedGaussians, RigidMotion,
};
pub use pose::{pose_backward, pose_gaussians, pose_gaussians_with, PoseOptions};
pub use uvmap::{channel, Binding, UvAttributeMap, RAW_CHANNELS};
