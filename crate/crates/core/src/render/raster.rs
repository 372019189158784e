//! Tile-based front-to-back alpha compositing and its analytic backward pass.
//!
//! Splats are sorted once per frame by `(depth, source)`, with depths
//! bucketed to [`DEPTH_QUANTUM`]. Each 16×16 tile
//! keeps the sorted subset whose 3σ box overlaps it. For pixel `p` and splat
//! `i`, `α_i = min(0.999, o_i · exp(−½ dᵀ Σ₂⁻¹ d))` with `d = p − mean`;
//! contributions with `α_i < 1/255` are skipped and a pixel stops once its
//! transmittance drops below `1e-4`. The leftover transmittance shows the
//! background and the alpha channel is `1 − T`.

use rayon::prelude::*;

use super::camera::Camera;
use super::image::{ImageBuffer, ImageF64};
use super::project::SplatFrame;
use crate::error::{Error, Result};

pub const TILE_SIZE: usize = 16;
pub const ALPHA_MAX: f64 = 0.999;
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
/// Depths closer than this (in meters) sort by source index.
pub const DEPTH_QUANTUM: f64 = 1e-9;

fn depth_key(depth: f64) -> i64 {
    (depth / DEPTH_QUANTUM).round() as i64
}

#[derive(Debug, Clone, Copy)]
struct Prepared {
    mean: [f64; 2],
    conic: [f64; 3],
    opacity: f64,
    color: [f64; 3],
    /// Below this exponent the splat is certainly under the skip threshold.
    power_floor: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RasterDiagnostics {
    /// Splats dropped because their regularized covariance was not invertible.
    pub singular_skipped: usize,
}

/// Everything the backward pass needs from the forward pass.
#[derive(Debug, Clone)]
pub struct RasterState {
    width: usize,
    height: usize,
    background: [f64; 3],
    prepared: Vec<Option<Prepared>>,
    tile_lists: Vec<Vec<u32>>,
    final_transmittance: Vec<f64>,
    /// Per pixel, one past the tile-list position of the last contributor.
    contributor_end: Vec<u32>,
}

impl RasterState {
    pub fn final_transmittance(&self) -> &[f64] {
        &self.final_transmittance
    }

    /// Splat indices per tile in compositing order (tiles row-major).
    pub fn tile_lists(&self) -> &[Vec<u32>] {
        &self.tile_lists
    }

    /// Per pixel, one past the tile-list position of its last contributor.
    pub fn contributor_end(&self) -> &[u32] {
        &self.contributor_end
    }
}

#[derive(Debug, Clone)]
pub struct RasterOutput {
    /// RGBA, f64.
    pub image: ImageF64,
    pub state: RasterState,
    pub diagnostics: RasterDiagnostics,
}

/// Per-splat gradients, indexed like `SplatFrame::splats`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplatGrads {
    pub mean2d: Vec<[f64; 2]>,
    /// With respect to `[xx, xy, yy]`, the off-diagonal counted once.
    pub cov2d: Vec<[f64; 3]>,
    pub color: Vec<[f64; 3]>,
    pub opacity: Vec<f64>,
}

impl SplatGrads {
    pub fn zeros(n: usize) -> Self {
        Self {
            mean2d: vec![[0.0; 2]; n],
            cov2d: vec![[0.0; 3]; n],
            color: vec![[0.0; 3]; n],
            opacity: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.opacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opacity.is_empty()
    }
}

fn tiles_x(width: usize) -> usize {
    width.div_ceil(TILE_SIZE)
}

fn prepare(frame: &SplatFrame, diagnostics: &mut RasterDiagnostics) -> Vec<Option<Prepared>> {
    frame
        .splats
        .iter()
        .map(|s| {
            let [a, b, c] = s.cov2d;
            let det = a * c - b * b;
            if !(det > 0.0 && a > 0.0) || !det.is_finite() {
                diagnostics.singular_skipped += 1;
                return None;
            }
            Some(Prepared {
                mean: s.mean2d,
                conic: [c / det, -b / det, a / det],
                opacity: s.opacity,
                color: s.color,
                power_floor: (ALPHA_MIN / s.opacity).ln() - 1e-9,
            })
        })
        .collect()
}

fn build_tile_lists(frame: &SplatFrame, prepared: &[Option<Prepared>], width: usize, height: usize) -> Vec<Vec<u32>> {
    let tx = tiles_x(width);
    let ty = height.div_ceil(TILE_SIZE);
    let mut order: Vec<usize> = (0..frame.len()).filter(|&i| prepared[i].is_some()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&frame.splats[i], &frame.splats[j]);
        depth_key(a.depth).cmp(&depth_key(b.depth)).then(a.source.cmp(&b.source))
    });
    let mut lists = vec![Vec::new(); tx * ty];
    for i in order {
        let s = &frame.splats[i];
        let [a, b, c] = s.cov2d;
        let mid = 0.5 * (a + c);
        let lambda = mid + (mid * mid - (a * c - b * b)).max(0.1).sqrt();
        let radius = (3.0 * lambda.sqrt()).ceil();
        let [mx, my] = s.mean2d;
        let (x0, x1) = (mx - radius, mx + radius);
        let (y0, y1) = (my - radius, my + radius);
        if !(x1 >= 0.0 && y1 >= 0.0 && x0 <= (width - 1) as f64 && y0 <= (height - 1) as f64) {
            continue;
        }
        let tx0 = (x0.max(0.0) as usize) / TILE_SIZE;
        let tx1 = ((x1.min((width - 1) as f64)) as usize) / TILE_SIZE;
        let ty0 = (y0.max(0.0) as usize) / TILE_SIZE;
        let ty1 = ((y1.min((height - 1) as f64)) as usize) / TILE_SIZE;
        for tyi in ty0..=ty1 {
            for txi in tx0..=tx1 {
                lists[tyi * tx + txi].push(i as u32);
            }
        }
    }
    lists
}

#[inline]
fn gaussian_power(p: &Prepared, px: f64, py: f64) -> (f64, f64, f64) {
    let dx = px - p.mean[0];
    let dy = py - p.mean[1];
    let [a, b, c] = p.conic;
    (-0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy, dx, dy)
}

fn tile_pixels(tile: usize, width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
    let tx = tiles_x(width);
    let (x0, y0) = ((tile % tx) * TILE_SIZE, (tile / tx) * TILE_SIZE);
    let (x1, y1) = ((x0 + TILE_SIZE).min(width), (y0 + TILE_SIZE).min(height));
    (y0..y1).flat_map(move |y| (x0..x1).map(move |x| (x, y)))
}

/// Forward pass returning the f64 RGBA image and the replay state.
pub fn rasterize_with_state(frame: &SplatFrame, camera: &Camera, background: [f64; 3]) -> RasterOutput {
    let (width, height) = (camera.width as usize, camera.height as usize);
    let mut diagnostics = RasterDiagnostics::default();
    let prepared = prepare(frame, &mut diagnostics);
    let tile_lists = build_tile_lists(frame, &prepared, width, height);

    struct PixelOut {
        x: usize,
        y: usize,
        rgba: [f64; 4],
        t: f64,
        end: u32,
    }

    let tiles: Vec<Vec<PixelOut>> = (0..tile_lists.len())
        .into_par_iter()
        .map(|tile| {
            let list = &tile_lists[tile];
            tile_pixels(tile, width, height)
                .map(|(x, y)| {
                    let (px, py) = (x as f64, y as f64);
                    let mut t = 1.0;
                    let mut rgb = [0.0; 3];
                    let mut end = 0u32;
                    for (k, &idx) in list.iter().enumerate() {
                        let p = prepared[idx as usize].as_ref().expect("listed splats are prepared");
                        let (power, _, _) = gaussian_power(p, px, py);
                        if power > 0.0 || power < p.power_floor {
                            continue;
                        }
                        let alpha = (p.opacity * power.exp()).min(ALPHA_MAX);
                        if alpha < ALPHA_MIN {
                            continue;
                        }
                        let w = alpha * t;
                        for c in 0..3 {
                            rgb[c] += p.color[c] * w;
                        }
                        t *= 1.0 - alpha;
                        end = k as u32 + 1;
                        if t < TRANSMITTANCE_MIN {
                            break;
                        }
                    }
                    let rgba = [
                        rgb[0] + t * background[0],
                        rgb[1] + t * background[1],
                        rgb[2] + t * background[2],
                        1.0 - t,
                    ];
                    PixelOut { x, y, rgba, t, end }
                })
                .collect()
        })
        .collect();

    let mut image = ImageF64::new(width, height, 4);
    let mut final_transmittance = vec![1.0; width * height];
    let mut contributor_end = vec![0u32; width * height];
    for px in tiles.into_iter().flatten() {
        image.pixel_mut(px.x, px.y).copy_from_slice(&px.rgba);
        final_transmittance[px.y * width + px.x] = px.t;
        contributor_end[px.y * width + px.x] = px.end;
    }
    RasterOutput {
        image,
        state: RasterState {
            width,
            height,
            background,
            prepared,
            tile_lists,
            final_transmittance,
            contributor_end,
        },
        diagnostics,
    }
}

/// Production forward pass (f32 RGBA).
pub fn rasterize(frame: &SplatFrame, camera: &Camera, background: [f64; 3]) -> ImageBuffer {
    rasterize_with_state(frame, camera, background).image.to_f32()
}

/// Gradients of `Σ upstream · image` with respect to every splat parameter.
///
/// Gradient contributions are accumulated per tile and merged in tile order,
/// so the result does not depend on the thread count.
pub fn rasterize_backward(frame: &SplatFrame, state: &RasterState, upstream: &ImageF64) -> Result<SplatGrads> {
    let (width, height) = (state.width, state.height);
    if upstream.width() != width || upstream.height() != height || upstream.channels() != 4 {
        return Err(Error::Dimension(format!(
            "upstream gradient {}×{}×{} for a {width}×{height}×4 render",
            upstream.width(),
            upstream.height(),
            upstream.channels()
        )));
    }
    if state.prepared.len() != frame.len() {
        return Err(Error::Dimension("raster state belongs to another frame".into()));
    }
    let bg = state.background;

    // per tile-list entry: mean(2) conic(3) color(3) opacity(1)
    let local: Vec<Vec<[f64; 9]>> = (0..state.tile_lists.len())
        .into_par_iter()
        .map(|tile| {
            let list = &state.tile_lists[tile];
            let mut acc = vec![[0.0; 9]; list.len()];
            for (x, y) in tile_pixels(tile, width, height) {
                let pix = y * width + x;
                let g = upstream.pixel(x, y);
                let t_final = state.final_transmittance[pix];
                let mut t = t_final;
                let mut behind = [t_final * bg[0], t_final * bg[1], t_final * bg[2]];
                let (px, py) = (x as f64, y as f64);
                for k in (0..state.contributor_end[pix] as usize).rev() {
                    let p = state.prepared[list[k] as usize].as_ref().expect("listed splats are prepared");
                    let (power, dx, dy) = gaussian_power(p, px, py);
                    if power > 0.0 || power < p.power_floor {
                        continue;
                    }
                    let gauss = power.exp();
                    let raw_alpha = p.opacity * gauss;
                    let alpha = raw_alpha.min(ALPHA_MAX);
                    if alpha < ALPHA_MIN {
                        continue;
                    }
                    let one_minus = 1.0 - alpha;
                    let t_before = t / one_minus;
                    let w = alpha * t_before;
                    let entry = &mut acc[k];
                    let mut d_alpha = g[3] * t_final / one_minus;
                    for c in 0..3 {
                        entry[5 + c] += g[c] * w;
                        d_alpha += g[c] * (p.color[c] * t_before - behind[c] / one_minus);
                        behind[c] += p.color[c] * w;
                    }
                    t = t_before;
                    if raw_alpha > ALPHA_MAX {
                        continue;
                    }
                    entry[8] += d_alpha * gauss;
                    let d_power = d_alpha * raw_alpha;
                    let [a, b, c] = p.conic;
                    // power = -½(a dx² + c dy²) - b dx dy, d = pixel - mean
                    entry[0] += d_power * (a * dx + b * dy);
                    entry[1] += d_power * (b * dx + c * dy);
                    entry[2] += d_power * (-0.5 * dx * dx);
                    entry[3] += d_power * (-dx * dy);
                    entry[4] += d_power * (-0.5 * dy * dy);
                }
            }
            acc
        })
        .collect();

    let mut conic_grads = vec![[0.0; 3]; frame.len()];
    let mut grads = SplatGrads::zeros(frame.len());
    for (list, acc) in state.tile_lists.iter().zip(&local) {
        for (&idx, e) in list.iter().zip(acc) {
            let i = idx as usize;
            grads.mean2d[i][0] += e[0];
            grads.mean2d[i][1] += e[1];
            for c in 0..3 {
                conic_grads[i][c] += e[2 + c];
                grads.color[i][c] += e[5 + c];
            }
            grads.opacity[i] += e[8];
        }
    }
    for (i, p) in state.prepared.iter().enumerate() {
        let Some(p) = p else { continue };
        // dL/dΣ = -Q G Q with G the symmetric conic gradient
        let [qa, qb, qc] = p.conic;
        let [ga, gb, gc] = conic_grads[i];
        let (g11, g12, g22) = (ga, 0.5 * gb, gc);
        // Q G
        let m11 = qa * g11 + qb * g12;
        let m12 = qa * g12 + qb * g22;
        let m21 = qb * g11 + qc * g12;
        let m22 = qb * g12 + qc * g22;
        // (Q G) Q
        let s11 = m11 * qa + m12 * qb;
        let s12 = m11 * qb + m12 * qc;
        let s22 = m21 * qb + m22 * qc;
        grads.cov2d[i] = [-s11, -2.0 * s12, -s22];
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::project::Splat;
    use nalgebra::Vector3;

    fn camera(w: u32, h: u32) -> Camera {
        Camera::look_at(&Vector3::new(0.0, 0.0, 3.0), &Vector3::zeros(), &Vector3::y(), 40.0, 40.0, w, h).unwrap()
    }

    fn splat(mean: [f64; 2], depth: f64, color: [f64; 3], opacity: f64, source: usize) -> Splat {
        Splat { mean2d: mean, cov2d: [4.0, 0.5, 3.0], depth, color, opacity, source }
    }

    #[test]
    fn empty_frame_is_background() {
        let out = rasterize(&SplatFrame::default(), &camera(20, 10), [0.2, 0.4, 0.6]);
        for y in 0..10 {
            for x in 0..20 {
                assert_eq!(out.pixel(x, y), &[0.2f32, 0.4, 0.6, 0.0]);
            }
        }
    }

    #[test]
    fn single_splat_compositing_oracle() {
        let cam = camera(8, 8);
        let frame = SplatFrame { splats: vec![splat([3.0, 4.0], 1.0, [0.9, 0.1, 0.3], 0.7, 0)] };
        let bg = [1.0, 1.0, 1.0];
        let out = rasterize_with_state(&frame, &cam, bg);
        let px = out.image.pixel(3, 4);
        let alpha = 0.7;
        for c in 0..3 {
            assert!((px[c] - (alpha * frame.splats[0].color[c] + (1.0 - alpha) * bg[c])).abs() < 1e-15);
        }
        assert!((px[3] - alpha).abs() < 1e-15);
    }

    #[test]
    fn permuted_input_is_bit_identical() {
        let cam = camera(40, 24);
        let mut splats: Vec<Splat> = (0..12)
            .map(|i| splat([3.0 * i as f64, 2.0 * i as f64 % 24.0], 1.0 + (i % 4) as f64, [0.1 * i as f64, 0.5, 0.2], 0.6, i))
            .collect();
        let a = rasterize(&SplatFrame { splats: splats.clone() }, &cam, [1.0; 3]);
        splats.reverse();
        splats.swap(2, 7);
        let b = rasterize(&SplatFrame { splats }, &cam, [1.0; 3]);
        assert_eq!(a, b);
    }

    #[test]
    fn singular_covariance_is_counted() {
        let mut s = splat([3.0, 3.0], 1.0, [1.0; 3], 0.5, 0);
        s.cov2d = [1.0, 1.0, 1.0];
        let out = rasterize_with_state(&SplatFrame { splats: vec![s] }, &camera(8, 8), [0.0; 3]);
        assert_eq!(out.diagnostics.singular_skipped, 1);
        assert!(out.image.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let cam = camera(16, 16);
        let frame = SplatFrame { splats: vec![splat([5.0, 6.0], 1.0, [0.3, 0.3, 0.3], 0.8, 0)] };
        let out = rasterize_with_state(&frame, &cam, [1.0; 3]);
        let g = rasterize_backward(&frame, &out.state, &ImageF64::new(16, 16, 4)).unwrap();
        assert_eq!(g, SplatGrads::zeros(1));
        assert!(matches!(
            rasterize_backward(&frame, &out.state, &ImageF64::new(16, 15, 4)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn color_gradient_equals_blend_weight() {
        let cam = camera(16, 16);
        let frame = SplatFrame { splats: vec![splat([5.0, 6.0], 1.0, [0.3, 0.3, 0.3], 0.8, 0)] };
        let out = rasterize_with_state(&frame, &cam, [1.0; 3]);
        let mut up = ImageF64::new(16, 16, 4);
        up.pixel_mut(5, 7)[1] = 1.0;
        let g = rasterize_backward(&frame, &out.state, &up).unwrap();
        let alpha = out.image.pixel(5, 7)[3];
        assert!((g.color[0][1] - alpha).abs() < 1e-15);
        assert_eq!(g.color[0][0], 0.0);
    }
}
