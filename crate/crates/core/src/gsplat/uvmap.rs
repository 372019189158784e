use crate::body::SkinnedTemplate;
use crate::error::{Error, Result};

/// Raw channels per texel: position offset (3), scale offset (3),
/// rotation offset axis-angle (3), opacity (1), color (3).
pub const RAW_CHANNELS: usize = 13;

pub mod channel {
    pub const POSITION: usize = 0;
    pub const SCALE: usize = 3;
    pub const ROTATION: usize = 6;
    pub const OPACITY: usize = 9;
    pub const COLOR: usize = 10;
}

/// Surface point of a valid texel on the template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binding {
    pub face: usize,
    pub bary: [f64; 3],
}

impl Binding {
    fn validate(&self) -> Result<()> {
        let sum: f64 = self.bary.iter().sum();
        if self.bary.iter().any(|b| !(*b >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid("binding", format!("barycentrics {:?}", self.bary)));
        }
        Ok(())
    }
}

/// `width × height` texel grid of raw Gaussian channels. Row `y` samples
/// `v = (y + ½)/height`, column `x` samples `u = (x + ½)/width`.
#[derive(Debug, Clone, PartialEq)]
pub struct UvAttributeMap {
    width: usize,
    height: usize,
    /// Texel-major, [`RAW_CHANNELS`] values per texel.
    raw: Vec<f64>,
    bindings: Vec<Option<Binding>>,
}

impl UvAttributeMap {
    pub fn new(width: usize, height: usize, bindings: Vec<Option<Binding>>) -> Result<Self> {
        if width == 0 || height == 0 || bindings.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} bindings for a {width}×{height} map",
                bindings.len()
            )));
        }
        for b in bindings.iter().flatten() {
            b.validate()?;
        }
        if bindings.iter().all(Option::is_none) {
            return Err(Error::invalid("uv map", "no valid texels"));
        }
        Ok(Self {
            width,
            height,
            raw: vec![0.0; width * height * RAW_CHANNELS],
            bindings,
        })
    }

    /// Binds every texel whose center falls inside a template UV triangle.
    /// The first face in index order wins on shared edges.
    pub fn from_template(template: &SkinnedTemplate, width: usize, height: usize) -> Result<Self> {
        let mut bindings: Vec<Option<Binding>> = vec![None; width * height];
        for (face, uv) in template.uv_coords().iter().enumerate() {
            let [a, b, c] = *uv;
            let area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if area.abs() < 1e-14 {
                continue;
            }
            let (umin, umax) = min_max([a[0], b[0], c[0]]);
            let (vmin, vmax) = min_max([a[1], b[1], c[1]]);
            let x0 = ((umin * width as f64 - 0.5).floor().max(0.0)) as usize;
            let x1 = ((umax * width as f64 - 0.5).ceil().max(0.0) as usize).min(width - 1);
            let y0 = ((vmin * height as f64 - 0.5).floor().max(0.0)) as usize;
            let y1 = ((vmax * height as f64 - 0.5).ceil().max(0.0) as usize).min(height - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let slot = &mut bindings[y * width + x];
                    if slot.is_some() {
                        continue;
                    }
                    let p = [(x as f64 + 0.5) / width as f64, (y as f64 + 0.5) / height as f64];
                    let w1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / area;
                    let w2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / area;
                    let w0 = 1.0 - w1 - w2;
                    let eps = -1e-12;
                    if w0 >= eps && w1 >= eps && w2 >= eps {
                        let clamped = [w0.max(0.0), w1.max(0.0), w2.max(0.0)];
                        let s: f64 = clamped.iter().sum();
                        *slot = Some(Binding {
                            face,
                            bary: [clamped[0] / s, clamped[1] / s, clamped[2] / s],
                        });
                    }
                }
            }
        }
        Self::new(width, height, bindings)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bindings(&self) -> &[Option<Binding>] {
        &self.bindings
    }

    pub fn is_valid(&self, texel: usize) -> bool {
        self.bindings[texel].is_some()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.bindings.iter().map(Option::is_some).collect()
    }

    /// Row-major indices of valid texels; Gaussian `i` decodes from `valid_texels()[i]`.
    pub fn valid_texels(&self) -> Vec<usize> {
        (0..self.bindings.len()).filter(|&i| self.bindings[i].is_some()).collect()
    }

    pub fn valid_count(&self) -> usize {
        self.bindings.iter().filter(|b| b.is_some()).count()
    }

    pub fn texel(&self, index: usize) -> &[f64] {
        &self.raw[index * RAW_CHANNELS..(index + 1) * RAW_CHANNELS]
    }

    pub fn texel_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.raw[index * RAW_CHANNELS..(index + 1) * RAW_CHANNELS]
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    /// Raw channels of the valid texels, concatenated in [`Self::valid_texels`] order.
    pub fn gather_valid(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.valid_count() * RAW_CHANNELS);
        for (i, b) in self.bindings.iter().enumerate() {
            if b.is_some() {
                out.extend_from_slice(self.texel(i));
            }
        }
        out
    }

    pub fn scatter_valid(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.valid_count() * RAW_CHANNELS {
            return Err(Error::Dimension(format!(
                "{} values for {} valid texels",
                values.len(),
                self.valid_count()
            )));
        }
        for (k, texel) in self.valid_texels().into_iter().enumerate() {
            self.texel_mut(texel)
                .copy_from_slice(&values[k * RAW_CHANNELS..(k + 1) * RAW_CHANNELS]);
        }
        Ok(())
    }

    /// Writes one channel group (e.g. color) for a valid texel.
    pub fn set_channels(&mut self, texel: usize, first: usize, values: &[f64]) -> Result<()> {
        if !self.is_valid(texel) {
            return Err(Error::Index(format!("texel {texel} is not valid")));
        }
        self.texel_mut(texel)[first..first + values.len()].copy_from_slice(values);
        Ok(())
    }

    pub(crate) fn from_parts(
        width: usize,
        height: usize,
        raw: Vec<f64>,
        bindings: Vec<Option<Binding>>,
    ) -> Result<Self> {
        let mut map = Self::new(width, height, bindings)?;
        if raw.len() != map.raw.len() {
            return Err(Error::Dimension("raw plane size".into()));
        }
        map.raw = raw;
        Ok(map)
    }
}

fn min_max(v: [f64; 3]) -> (f64, f64) {
    (v[0].min(v[1]).min(v[2]), v[0].max(v[1]).max(v[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{procedural_humanoid, HumanoidParams};

    #[test]
    fn humanoid_atlas_binds_most_texels() {
        let t = procedural_humanoid(&HumanoidParams::default());
        let map = UvAttributeMap::from_template(&t, 64, 64).unwrap();
        let frac = map.valid_count() as f64 / (64.0 * 64.0);
        assert!(frac > 0.7 && frac < 1.0, "valid fraction {frac}");
        for b in map.bindings().iter().flatten() {
            assert!(b.face < t.faces().len());
            assert!((b.bary.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gather_scatter_only_touch_valid_texels() {
        let t = procedural_humanoid(&HumanoidParams::default());
        let mut map = UvAttributeMap::from_template(&t, 32, 32).unwrap();
        let vals: Vec<f64> = (0..map.valid_count() * RAW_CHANNELS).map(|i| i as f64).collect();
        map.scatter_valid(&vals).unwrap();
        assert_eq!(map.gather_valid(), vals);
        for (i, valid) in map.mask().iter().enumerate() {
            if !valid {
                assert!(map.texel(i).iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn rejects_empty_and_bad_bindings() {
        assert!(UvAttributeMap::new(2, 2, vec![None; 4]).is_err());
        let bad = Binding { face: 0, bary: [0.5, 0.6, -0.1] };
        assert!(UvAttributeMap::new(1, 1, vec![Some(bad)]).is_err());
    }
}
