//! Deterministic synthetic scenes shared by tests, benchmarks and the CLI.

use std::f64::consts::TAU;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::body::{procedural_humanoid, HumanoidParams, SkinWeights, SkinnedTemplate};
use crate::error::Result;
use crate::fit::{render_raw, FitConfig};
use crate::gsplat::{channel, DecodeBasis, UvAttributeMap, RAW_CHANNELS};
use crate::pipeline::{generate_rig, CameraRigSpec};
use crate::render::{Camera, ImageBuffer, DEFAULT_BACKGROUND};

/// Gaussians scattered in front of a small camera, with random raw channels.
pub struct RandomScene {
    pub basis: DecodeBasis,
    pub raw: Vec<f64>,
    pub camera: Camera,
}

pub fn random_scene(seed: u64, count: usize, size: u32) -> RandomScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::with_capacity(count);
    let mut scales = Vec::with_capacity(count);
    let mut raw = Vec::with_capacity(count * RAW_CHANNELS);
    for _ in 0..count {
        positions.push(Vector3::new(
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.6..0.6),
            rng.random_range(-0.5..0.5),
        ));
        scales.push(Vector3::repeat(rng.random_range(0.04..0.12)));
        let mut t = [0.0; RAW_CHANNELS];
        for (c, v) in t.iter_mut().enumerate() {
            let spread = match c {
                c if c < channel::SCALE => 0.05,
                c if c < channel::ROTATION => 0.4,
                c if c < channel::OPACITY => 1.0,
                _ => 1.5,
            };
            *v = rng.random_range(-spread..spread);
        }
        raw.extend_from_slice(&t);
    }
    let basis = DecodeBasis::from_parts(positions, scales, vec![SkinWeights::single(0); count])
        .expect("positive scales");
    let f = 2.0 * size as f64;
    let camera = Camera::look_at(&Vector3::new(0.3, 0.2, 3.0), &Vector3::zeros(), &Vector3::y(), f, f, size, size)
        .expect("valid camera");
    RandomScene { basis, raw, camera }
}

pub fn test_humanoid() -> SkinnedTemplate {
    procedural_humanoid(&HumanoidParams::default())
}

/// Zero geometry offsets, raw opacity 3 and a smooth multi-frequency color pattern over UV.
pub fn procedural_target_map(template: &SkinnedTemplate, width: usize, height: usize) -> Result<UvAttributeMap> {
    let mut map = UvAttributeMap::from_template(template, width, height)?;
    for texel in map.valid_texels() {
        let u = ((texel % width) as f64 + 0.5) / width as f64;
        let v = ((texel / width) as f64 + 0.5) / height as f64;
        let color = [
            1.6 * (TAU * 3.0 * u).sin() + 0.3,
            1.6 * (TAU * 2.0 * v).cos() - 0.2,
            1.4 * (TAU * 2.0 * (u + v)).sin(),
        ];
        map.set_channels(texel, channel::OPACITY, &[3.0])?;
        map.set_channels(texel, channel::COLOR, &color)?;
    }
    Ok(map)
}

/// Multi-view fitting fixture: targets rendered from a known map.
pub struct SelfConsistency {
    pub template: SkinnedTemplate,
    pub target_map: UvAttributeMap,
    /// Input views first, then held-out views.
    pub targets: Vec<(Camera, ImageBuffer)>,
    pub input_views: Vec<usize>,
    pub eval_views: Vec<usize>,
}

/// Horizontal-ring azimuth indices (of 30) used as inputs and held-out views.
pub const FIT_INPUT_AZIMUTHS: [usize; 6] = [0, 5, 10, 15, 20, 25];
pub const FIT_EVAL_AZIMUTHS: [usize; 4] = [2, 9, 17, 23];

pub fn self_consistency(uv_size: usize, image_size: u32) -> Result<SelfConsistency> {
    let template = test_humanoid();
    let target_map = procedural_target_map(&template, uv_size, uv_size)?;
    let basis = DecodeBasis::new(&target_map, &template)?;
    let raw = target_map.gather_valid();
    let ring = generate_rig(&CameraRigSpec::horizontal(30))?;
    let mut targets = Vec::new();
    for &k in FIT_INPUT_AZIMUTHS.iter().chain(&FIT_EVAL_AZIMUTHS) {
        let cam = ring[k].resized(image_size, image_size);
        let img = render_raw(&basis, &raw, &cam, DEFAULT_BACKGROUND)?.to_f32();
        targets.push((cam, img));
    }
    let n_in = FIT_INPUT_AZIMUTHS.len();
    Ok(SelfConsistency {
        template,
        target_map,
        targets,
        input_views: (0..n_in).collect(),
        eval_views: (n_in..n_in + FIT_EVAL_AZIMUTHS.len()).collect(),
    })
}

impl SelfConsistency {
    pub fn fit_config(&self, iterations: usize) -> FitConfig {
        FitConfig {
            iterations,
            input_views: self.input_views.clone(),
            eval_views: self.eval_views.clone(),
            uv_width: self.target_map.width(),
            uv_height: self.target_map.height(),
            ..FitConfig::default()
        }
    }
}
