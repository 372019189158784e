//! TOML config file. Every table is optional; command-line flags win over it.
//!
//! ```toml
//! threads = 1
//! seed = 7
//!
//! [fit]
//! iterations = 500
//! lambda_ssim = 0.2
//!
//! [sampler]
//! steps = 30
//! cfg_scale = 3.5
//!
//! [rig]
//! width = 256
//! height = 256
//! fx = 280.0
//! fy = 280.0
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use hgs_core::diffusion::SamplerConfig;
use hgs_core::fit::FitConfig;
use hgs_core::pipeline::CameraRigSpec;
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub fit: Option<FitConfig>,
    pub sampler: Option<SamplerConfig>,
    pub rig: Option<CameraRigSpec>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
