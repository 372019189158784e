//! Directory layouts shared by the subcommands.
//!
//! A view directory holds `cameras/<name>.json` and `renders/<name>.png`, the
//! layout `render` writes. A bare directory of camera JSON files also works
//! wherever only cameras are needed.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hgs_core::render::{Camera, ImageBuffer};
use serde::{Deserialize, Serialize};

pub const SPLIT_FILE: &str = "split.json";

/// Input and held-out view indices stored next to a fixture's views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub input: Vec<usize>,
    pub eval: Vec<usize>,
}

impl Split {
    pub fn load_if_present(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(SPLIT_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
    }
}

fn camera_dir(dir: &Path) -> PathBuf {
    let sub = dir.join("cameras");
    if sub.is_dir() {
        sub
    } else {
        dir.to_path_buf()
    }
}

/// Camera files sorted by name, with their stems.
pub fn load_cameras(dir: &Path) -> Result<Vec<(String, Camera)>> {
    let dir = camera_dir(dir);
    let entries = fs::read_dir(&dir).with_context(|| format!("listing cameras in {}", dir.display()))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        bail!("no camera files in {}", dir.display());
    }
    paths
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let cam = Camera::load(&p).with_context(|| format!("loading camera {}", p.display()))?;
            Ok((stem, cam))
        })
        .collect()
}

/// Every camera of a view directory paired with its image.
pub fn load_views(dir: &Path) -> Result<Vec<(Camera, ImageBuffer)>> {
    let renders = dir.join("renders");
    let image_dir = if renders.is_dir() { renders } else { dir.to_path_buf() };
    load_cameras(dir)?
        .into_iter()
        .map(|(stem, cam)| {
            let path = image_dir.join(format!("{stem}.png"));
            if !path.is_file() {
                bail!("missing target image {}", path.display());
            }
            let img = ImageBuffer::load_png(&path).with_context(|| format!("loading {}", path.display()))?;
            if img.width() != cam.width as usize || img.height() != cam.height as usize {
                bail!(
                    "{} is {}×{} but its camera is {}×{}",
                    path.display(),
                    img.width(),
                    img.height(),
                    cam.width,
                    cam.height
                );
            }
            Ok((cam, img))
        })
        .collect()
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Creates the directory a single-file output goes into.
pub fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
