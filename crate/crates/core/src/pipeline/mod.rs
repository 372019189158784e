//! Dataset construction: canonicalization, the camera rig, UV initialization
//! by back-projection, and batch rendering.

mod batch;
mod canonical;
mod init_uv;
mod rig;

pub use batch::{batch_render, view_name, AssetManifest, BatchOptions, FileEntry, RootTransform, ASSET_FILE, MANIFEST_FILE};
pub use canonical::{canonicalize, decanonicalize};
pub use init_uv::{
    evenly_spaced, init_uv_map, render_face_buffer, FaceBuffer, DEFAULT_INIT_VIEWS, VISIBILITY_TOLERANCE,
};
pub use rig::{
    generate_rig, ring_position, CameraRigSpec, RingSpec, DEFAULT_FOCAL, DEFAULT_IMAGE_SIZE, DEFAULT_RADIUS,
    DEFAULT_TARGET,
};
