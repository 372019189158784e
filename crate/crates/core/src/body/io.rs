//! Template file: `HGTP`, version, JSON header length, JSON header, then a
//! little-endian blob of vertex positions (f32), faces (u32), per-corner UVs
//! (f32) and four `(joint u32, weight f32)` slots per vertex.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{Joint, SkinWeights, SkinnedTemplate, MAX_INFLUENCES};
use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::Result;

const MAGIC: &[u8; 4] = b"HGTP";
const VERSION: u32 = 1;
const EMPTY_SLOT: u32 = u32::MAX;

#[derive(Serialize, Deserialize)]
struct Header {
    vertex_count: usize,
    face_count: usize,
    joints: Vec<Joint>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl SkinnedTemplate {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            vertex_count: self.vertices.len(),
            face_count: self.faces.len(),
            joints: self.joints.clone(),
            metadata: BTreeMap::from([("generator".to_string(), "hgs-core".to_string())]),
        };
        let json = serde_json::to_vec(&header).expect("template header serializes");
        let mut w = ByteWriter::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u32(json.len() as u32);
        w.bytes(&json);
        w.f32s(self.vertices.iter().flat_map(|v| [v.x, v.y, v.z]));
        for f in &self.faces {
            f.iter().for_each(|&i| w.u32(i));
        }
        w.f32s(self.uv_coords.iter().flatten().flatten().copied());
        for sw in &self.skin_weights {
            for slot in 0..MAX_INFLUENCES {
                match sw.entries().get(slot) {
                    Some(&(j, wt)) => {
                        w.u32(j as u32);
                        w.f32(wt);
                    }
                    None => {
                        w.u32(EMPTY_SLOT);
                        w.f32(0.0);
                    }
                }
            }
        }
        w.buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| crate::Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = read_file(path)?;
        Self::from_bytes(&data, path)
    }

    pub fn from_bytes(data: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(data, path);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported template version {version}")));
        }
        let header_len = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(header_len)?)?;
        let vertices = r
            .f32s(3 * header.vertex_count)?
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        let mut faces = Vec::with_capacity(header.face_count);
        for _ in 0..header.face_count {
            faces.push([r.u32()?, r.u32()?, r.u32()?]);
        }
        let uv_coords = r
            .f32s(6 * header.face_count)?
            .chunks_exact(6)
            .map(|c| [[c[0], c[1]], [c[2], c[3]], [c[4], c[5]]])
            .collect();
        let mut skin_weights = Vec::with_capacity(header.vertex_count);
        for _ in 0..header.vertex_count {
            let mut pairs = Vec::new();
            for _ in 0..MAX_INFLUENCES {
                let j = r.u32()?;
                let w = r.f32()?;
                if j != EMPTY_SLOT {
                    pairs.push((j as usize, w));
                }
            }
            skin_weights.push(SkinWeights::from_raw(&pairs)?);
        }
        r.finish()?;
        SkinnedTemplate::new(vertices, faces, uv_coords, header.joints, skin_weights)
    }
}
