//! Rendering an asset from a rig into a checksummed directory.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsplat::PosedGaussians;
use crate::render::{project_gaussians, rasterize, Camera};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ASSET_FILE: &str = "asset.hgsa";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crc32: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RootTransform {
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetManifest {
    pub asset_id: String,
    pub source: String,
    /// Root transform removed by canonicalization before rendering.
    pub root_transform: RootTransform,
    pub background: [f64; 3],
    pub asset: FileEntry,
    pub cameras: Vec<FileEntry>,
    pub renders: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOptions {
    pub asset_id: String,
    pub source: String,
    pub root_transform: RootTransform,
    pub background: [f64; 3],
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            asset_id: "asset".into(),
            source: "unknown".into(),
            root_transform: RootTransform::default(),
            background: crate::render::DEFAULT_BACKGROUND,
        }
    }
}

pub fn view_name(index: usize) -> String {
    format!("view_{index:03}")
}

fn write_entry(root: &Path, rel: String, bytes: Result<Vec<u8>>) -> FileEntry {
    let result = bytes.and_then(|b| {
        let path = root.join(&rel);
        fs::write(&path, &b).map_err(|e| Error::io(&path, e))?;
        Ok(crc32fast::hash(&b))
    });
    match result {
        Ok(crc) => FileEntry {
            path: rel,
            crc32: Some(crc),
            error: None,
        },
        Err(e) => {
            log::error!("{rel}: {e}");
            FileEntry {
                path: rel,
                crc32: None,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Writes `asset.hgsa`, `cameras/view_XXX.json`, `renders/view_XXX.png` and
/// `manifest.json`. Per-file failures are recorded in the manifest; failing to
/// create the directories or write the manifest is an error.
pub fn batch_render(asset: &PosedGaussians, cameras: &[Camera], out_dir: &Path, options: &BatchOptions) -> Result<AssetManifest> {
    for sub in ["cameras", "renders"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let images: Vec<Result<Vec<u8>>> = cameras
        .par_iter()
        .map(|cam| {
            cam.validate()?;
            let img = rasterize(&project_gaussians(asset, cam), cam, options.background);
            img.to_png_bytes()
        })
        .collect();

    let asset_entry = write_entry(out_dir, ASSET_FILE.into(), Ok(asset.to_bytes()));
    let mut camera_entries = Vec::with_capacity(cameras.len());
    let mut render_entries = Vec::with_capacity(cameras.len());
    for (i, (cam, png)) in cameras.iter().zip(images).enumerate() {
        let name = view_name(i);
        camera_entries.push(write_entry(out_dir, format!("cameras/{name}.json"), Ok(cam.to_json().into_bytes())));
        render_entries.push(write_entry(out_dir, format!("renders/{name}.png"), png));
    }
    let manifest = AssetManifest {
        asset_id: options.asset_id.clone(),
        source: options.source.clone(),
        root_transform: options.root_transform,
        background: options.background,
        asset: asset_entry,
        cameras: camera_entries,
        renders: render_entries,
    };
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

impl AssetManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn entries(&self) -> impl Iterator<Item = &FileEntry> {
        std::iter::once(&self.asset).chain(&self.cameras).chain(&self.renders)
    }

    /// Paths whose file is missing, failed to write, or no longer matches its checksum.
    pub fn verify(&self, root: &Path) -> Vec<String> {
        self.entries()
            .filter(|e| match e.crc32 {
                None => true,
                Some(crc) => fs::read(root.join(&e.path)).map_or(true, |b| crc32fast::hash(&b) != crc),
            })
            .map(|e| e.path.clone())
            .collect()
    }
}
