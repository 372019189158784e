//! Binary formats: the `HGSA` Gaussian asset and the `HGUV` attribute map.
//!
//! `HGSA`: magic, version u32, count N u32, then f32 arrays
//! `[positions 3N][scales 3N][quaternions wxyz 4N][opacities N][colors 3N]`.
//!
//! `HGUV`: magic, version u32, width u32, height u32, mask (one byte per
//! texel), 13 raw channel planes of f32, then one `(face u32, bary 3×f32)`
//! record per valid texel in row-major order.

use std::path::Path;

use nalgebra::Vector3;

use super::gaussians::{CanonicalGaussians, PosedGaussians};
use super::uvmap::{Binding, UvAttributeMap, RAW_CHANNELS};
use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::math::{quat_from_wxyz, quat_to_wxyz};

const ASSET_MAGIC: &[u8; 4] = b"HGSA";
const UV_MAGIC: &[u8; 4] = b"HGUV";
const VERSION: u32 = 1;

impl PosedGaussians {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(ASSET_MAGIC);
        w.u32(VERSION);
        w.u32(self.len() as u32);
        w.f32s(self.positions.iter().flat_map(|v| [v.x, v.y, v.z]));
        w.f32s(self.scales.iter().flat_map(|v| [v.x, v.y, v.z]));
        w.f32s(self.rotations.iter().flat_map(quat_to_wxyz));
        w.f32s(self.opacities.iter().copied());
        w.f32s(self.colors.iter().flat_map(|v| [v.x, v.y, v.z]));
        w.buf
    }

    pub fn from_bytes(data: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(data, path);
        r.magic(ASSET_MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported asset version {version}")));
        }
        let n = r.u32()? as usize;
        let v3 = |v: Vec<f64>| -> Vec<Vector3<f64>> {
            v.chunks_exact(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect()
        };
        let positions = v3(r.f32s(3 * n)?);
        let scales = v3(r.f32s(3 * n)?);
        let rotations = r
            .f32s(4 * n)?
            .chunks_exact(4)
            .map(|c| quat_from_wxyz([c[0], c[1], c[2], c[3]]))
            .collect();
        let opacities = r.f32s(n)?;
        let colors = v3(r.f32s(3 * n)?);
        r.finish()?;
        PosedGaussians::from_attributes(positions, scales, rotations, opacities, colors)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

impl CanonicalGaussians {
    /// Writes the asset without skinning weights.
    pub fn save_asset(&self, path: &Path) -> Result<()> {
        self.to_posed().save(path)
    }
}

impl UvAttributeMap {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(UV_MAGIC);
        w.u32(VERSION);
        w.u32(self.width() as u32);
        w.u32(self.height() as u32);
        let mask: Vec<u8> = self.mask().iter().map(|&m| m as u8).collect();
        w.bytes(&mask);
        let texels = self.width() * self.height();
        for c in 0..RAW_CHANNELS {
            w.f32s((0..texels).map(|t| self.raw()[t * RAW_CHANNELS + c]));
        }
        for b in self.bindings().iter().flatten() {
            w.u32(b.face as u32);
            w.f32s(b.bary);
        }
        w.buf
    }

    pub fn from_bytes(data: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(data, path);
        r.magic(UV_MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported uv map version {version}")));
        }
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let texels = width
            .checked_mul(height)
            .ok_or_else(|| r.err("map dimensions overflow"))?;
        let mask = r.take(texels)?.to_vec();
        let mut raw = vec![0.0; texels * RAW_CHANNELS];
        for c in 0..RAW_CHANNELS {
            for (t, v) in r.f32s(texels)?.into_iter().enumerate() {
                raw[t * RAW_CHANNELS + c] = v;
            }
        }
        let mut bindings = Vec::with_capacity(texels);
        for &m in &mask {
            bindings.push(match m {
                0 => None,
                1 => {
                    let face = r.u32()? as usize;
                    let b = r.f32s(3)?;
                    Some(Binding { face, bary: [b[0], b[1], b[2]] })
                }
                other => return Err(r.err(format!("mask byte {other}"))),
            });
        }
        r.finish()?;
        for (t, b) in bindings.iter().enumerate() {
            if b.is_none() && raw[t * RAW_CHANNELS..(t + 1) * RAW_CHANNELS].iter().any(|v| *v != 0.0) {
                return Err(Error::format(path, format!("invalid texel {t} carries data")));
            }
        }
        UvAttributeMap::from_parts(width, height, raw, bindings)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}
