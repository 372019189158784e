use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const DEFAULT_LATENT_SHAPE: (usize, usize, usize) = (64, 64, 16);
const MAGIC: &[u8; 4] = b"HGLT";
const VERSION: u32 = 1;

/// `height × width × channels` latent grid stored as channel planes.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl LatentTensor {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "{} values for a {height}×{width}×{channels} latent",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent values".into()));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Standard normal entries from a seeded ChaCha8 stream.
    pub fn randn(height: usize, width: usize, channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..height * width * channels)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v as f32
            })
            .collect();
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Value at row `y`, column `x`, channel `c`.
    pub fn at(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!("latent {:?} vs {:?}", self.shape(), other.shape())));
        }
        Ok(())
    }

    /// Elementwise `f(a, b)` evaluated in f64.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a as f64, b as f64) as f32)
                .collect(),
            ..*self
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&a| f(a as f64) as f32).collect(),
            ..*self
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u32(self.height as u32);
        w.u32(self.width as u32);
        w.u32(self.channels as u32);
        for v in &self.data {
            w.bytes(&v.to_le_bytes());
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(bytes, path);
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let height = r.u32()? as usize;
        let width = r.u32()? as usize;
        let channels = r.u32()? as usize;
        let n = height
            .checked_mul(width)
            .and_then(|v| v.checked_mul(channels))
            .ok_or_else(|| r.err("latent size overflows"))?;
        let data = r.f32s(n)?.into_iter().map(|v| v as f32).collect();
        r.finish()?;
        Self::from_data(height, width, channels, data).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

impl Default for LatentTensor {
    fn default() -> Self {
        let (h, w, c) = DEFAULT_LATENT_SHAPE;
        Self::zeros(h, w, c)
    }
}
