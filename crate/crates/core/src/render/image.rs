//! Interleaved float images with PNG and raw-plane I/O.

use std::fs::File;
use std::path::Path;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};

/// Row-major, channel-interleaved image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

/// Production image type (RGB + alpha in renders).
pub type ImageBuffer = Image<f32>;
/// Double-precision image used by the gradient-checked paths.
pub type ImageF64 = Image<f64>;

impl<T: Copy + Default> Image<T> {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![T::default(); width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, value: &[T]) -> Self {
        let channels = value.len();
        let data = value.iter().copied().cycle().take(width * height * channels).collect();
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "{} values for a {width}×{height}×{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [T] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn same_shape<U>(&self, other: &Image<U>) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }
}

impl ImageF64 {
    pub fn to_f32(&self) -> ImageBuffer {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }
}

impl ImageBuffer {
    pub fn to_f64(&self) -> ImageF64 {
        Image {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

impl<T: Copy + Default + Into<f64>> Image<T> {
    /// First three channels as f64.
    pub fn rgb_f64(&self) -> ImageF64 {
        let mut out = ImageF64::new(self.width, self.height, 3);
        for (o, px) in out.data.chunks_exact_mut(3).zip(self.data.chunks_exact(self.channels)) {
            for c in 0..3 {
                o[c] = px[c.min(self.channels - 1)].into();
            }
        }
        out
    }

    /// Encodes an 8-bit PNG (gray, RGB or RGBA depending on channel count).
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let color = match self.channels {
            1 => png::ColorType::Grayscale,
            3 => png::ColorType::Rgb,
            4 => png::ColorType::Rgba,
            c => return Err(Error::Dimension(format!("cannot write {c}-channel png"))),
        };
        let mut out = Vec::new();
        let mut encoder = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v.into().clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let mut writer = encoder.write_header().map_err(|e| Error::Png(e.to_string()))?;
        writer.write_image_data(&bytes).map_err(|e| Error::Png(e.to_string()))?;
        writer.finish().map_err(|e| Error::Png(e.to_string()))?;
        Ok(out)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.to_png_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Raw little-endian planes: `HGIM`, width, height, channels, then one
    /// f32 plane per channel.
    pub fn to_plane_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(b"HGIM");
        w.u32(self.width as u32);
        w.u32(self.height as u32);
        w.u32(self.channels as u32);
        for c in 0..self.channels {
            w.f32s(self.data.iter().skip(c).step_by(self.channels).map(|&v| v.into()));
        }
        w.buf
    }

    pub fn save_planes(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_plane_bytes()).map_err(|e| Error::io(path, e))
    }
}

impl ImageBuffer {
    /// Reads an 8-bit PNG into `[0, 1]` floats; palette and 16-bit inputs are expanded.
    pub fn load_png(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut decoder = png::Decoder::new(std::io::BufReader::new(file));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| Error::Png("image too large".into()))?;
        let mut buf = vec![0u8; size];
        let info = reader.next_frame(&mut buf).map_err(|e| Error::Png(e.to_string()))?;
        let channels = match info.color_type {
            png::ColorType::Grayscale => 1,
            png::ColorType::GrayscaleAlpha => 2,
            png::ColorType::Rgb => 3,
            png::ColorType::Rgba => 4,
            png::ColorType::Indexed => return Err(Error::Png("unexpanded palette".into())),
        };
        let data = buf[..info.buffer_size()]
            .iter()
            .map(|&b| b as f32 / 255.0)
            .collect();
        Image::from_data(info.width as usize, info.height as usize, channels, data)
    }

    pub fn load_planes(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let mut r = ByteReader::new(&bytes, path);
        r.magic(b"HGIM")?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let channels = r.u32()? as usize;
        let mut img = ImageBuffer::new(width, height, channels);
        for c in 0..channels {
            for (i, v) in r.f32s(width * height)?.into_iter().enumerate() {
                img.data[i * channels + c] = v as f32;
            }
        }
        r.finish()?;
        Ok(img)
    }
}
