//! UV map initialization by projecting view colors back onto the template.

use std::collections::VecDeque;

use nalgebra::Vector3;

use crate::body::SkinnedTemplate;
use crate::error::{Error, Result};
use crate::gsplat::{channel, DecodeBasis, UvAttributeMap};
use crate::math::logit;
use crate::render::{Camera, ImageBuffer};

/// Depth tolerance of the visibility test, meters.
pub const VISIBILITY_TOLERANCE: f64 = 1e-3;
/// Views used by default.
pub const DEFAULT_INIT_VIEWS: usize = 16;

/// Nearest-surface face per pixel of one view (`u32::MAX` for background).
pub struct FaceBuffer {
    width: usize,
    height: usize,
    faces: Vec<u32>,
    depth: Vec<f64>,
}

impl FaceBuffer {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn face_at(&self, x: usize, y: usize) -> Option<usize> {
        let f = self.faces[y * self.width + x];
        (f != u32::MAX).then_some(f as usize)
    }

    pub fn depth_at(&self, x: usize, y: usize) -> f64 {
        self.depth[y * self.width + x]
    }
}

/// Z-buffered rasterization of the rest-pose template (pixel centers at integer coordinates).
pub fn render_face_buffer(template: &SkinnedTemplate, camera: &Camera) -> FaceBuffer {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let mut buf = FaceBuffer {
        width: w,
        height: h,
        faces: vec![u32::MAX; w * h],
        depth: vec![f64::INFINITY; w * h],
    };
    let cam_pts: Vec<Vector3<f64>> = template.vertices().iter().map(|v| camera.world_to_camera(v)).collect();
    for (fi, face) in template.faces().iter().enumerate() {
        let p = face.map(|i| cam_pts[i as usize]);
        if p.iter().any(|q| q.z <= camera.near) {
            continue;
        }
        let s = p.map(|q| camera.project_camera_point(&q));
        let area = (s[1][0] - s[0][0]) * (s[2][1] - s[0][1]) - (s[2][0] - s[0][0]) * (s[1][1] - s[0][1]);
        if area.abs() < 1e-12 {
            continue;
        }
        let xmin = s.iter().map(|q| q[0]).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let xmax = s.iter().map(|q| q[0]).fold(f64::NEG_INFINITY, f64::max).floor().min((w - 1) as f64);
        let ymin = s.iter().map(|q| q[1]).fold(f64::INFINITY, f64::min).ceil().max(0.0);
        let ymax = s.iter().map(|q| q[1]).fold(f64::NEG_INFINITY, f64::max).floor().min((h - 1) as f64);
        if xmin > xmax || ymin > ymax {
            continue;
        }
        for y in ymin as usize..=ymax as usize {
            for x in xmin as usize..=xmax as usize {
                let (px, py) = (x as f64, y as f64);
                let w1 = ((px - s[0][0]) * (s[2][1] - s[0][1]) - (s[2][0] - s[0][0]) * (py - s[0][1])) / area;
                let w2 = ((s[1][0] - s[0][0]) * (py - s[0][1]) - (px - s[0][0]) * (s[1][1] - s[0][1])) / area;
                let w0 = 1.0 - w1 - w2;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv_z = w0 / p[0].z + w1 / p[1].z + w2 / p[2].z;
                let z = 1.0 / inv_z;
                let k = y * w + x;
                if z < buf.depth[k] {
                    buf.depth[k] = z;
                    buf.faces[k] = fi as u32;
                }
            }
        }
    }
    buf
}

/// Camera-space depth where the ray through `(u, v)` crosses the triangle of
/// `face`, or infinity when it passes outside it.
fn triangle_depth(template: &SkinnedTemplate, camera: &Camera, face: usize, u: f64, v: f64) -> f64 {
    let c = template.face_vertices(face).map(|p| camera.world_to_camera(&p));
    let d = Vector3::new((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0);
    let (e1, e2) = (c[1] - c[0], c[2] - c[0]);
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-15 {
        return f64::INFINITY;
    }
    let a = -c[0].dot(&p) / det;
    let q = (-c[0]).cross(&e1);
    let b = d.dot(&q) / det;
    if a < 0.0 || b < 0.0 || a + b > 1.0 {
        return f64::INFINITY;
    }
    e2.dot(&q) / det
}

/// Indices of `select` views spread evenly over `0..count`.
pub fn evenly_spaced(count: usize, select: usize) -> Vec<usize> {
    if select == 0 || select >= count {
        return (0..count).collect();
    }
    (0..select).map(|k| k * count / select).collect()
}

/// Whether the template point of `face` at world position `p` is seen by `camera`.
fn visible_pixel(
    template: &SkinnedTemplate,
    camera: &Camera,
    buffer: &FaceBuffer,
    face: usize,
    p: &Vector3<f64>,
) -> Option<(usize, usize)> {
    if template.face_normal(face).dot(&(camera.center() - p)) <= 0.0 {
        return None;
    }
    let t = camera.world_to_camera(p);
    if !(t.z > camera.near && t.z < camera.far) {
        return None;
    }
    let [u, v] = camera.project_camera_point(&t);
    let (x, y) = (u.round(), v.round());
    if x < 0.0 || y < 0.0 || x >= camera.width as f64 || y >= camera.height as f64 {
        return None;
    }
    let (x, y) = (x as usize, y as usize);
    let hit = buffer.face_at(x, y)?;
    if hit == face || triangle_depth(template, camera, hit, u, v) >= t.z - VISIBILITY_TOLERANCE {
        Some((x, y))
    } else {
        None
    }
}

/// Color channels from the average of the visible view samples; other channels zero.
///
/// `select` views are taken evenly from `views`. Texels seen by no view copy
/// the color of the nearest seen texel on the UV grid.
pub fn init_uv_map(
    template: &SkinnedTemplate,
    views: &[(Camera, ImageBuffer)],
    select: usize,
    width: usize,
    height: usize,
) -> Result<UvAttributeMap> {
    if views.is_empty() {
        return Err(Error::invalid("init views", "at least one view is required"));
    }
    for (cam, img) in views {
        cam.validate()?;
        if img.width() != cam.width as usize || img.height() != cam.height as usize || img.channels() < 3 {
            return Err(Error::Dimension(format!(
                "view image {}×{}×{} for a {}×{} camera",
                img.width(),
                img.height(),
                img.channels(),
                cam.width,
                cam.height
            )));
        }
    }
    let mut map = UvAttributeMap::from_template(template, width, height)?;
    let basis = DecodeBasis::new(&map, template)?;
    let texels = map.valid_texels();
    let faces: Vec<usize> = map.bindings().iter().flatten().map(|b| b.face).collect();

    let mut sums = vec![[0.0f64; 3]; texels.len()];
    let mut counts = vec![0usize; texels.len()];
    for vi in evenly_spaced(views.len(), select) {
        let (camera, image) = &views[vi];
        let buffer = render_face_buffer(template, camera);
        for (k, p) in basis.base_positions.iter().enumerate() {
            if let Some((x, y)) = visible_pixel(template, camera, &buffer, faces[k], p) {
                let px = image.pixel(x, y);
                for c in 0..3 {
                    sums[k][c] += px[c] as f64;
                }
                counts[k] += 1;
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        log::warn!("no texel is visible in any selected view; color channels left at zero");
        return Ok(map);
    }

    let mut color: Vec<Option<[f64; 3]>> = vec![None; width * height];
    for (k, &texel) in texels.iter().enumerate() {
        if counts[k] > 0 {
            color[texel] = Some(sums[k].map(|s| s / counts[k] as f64));
        }
    }
    // multi-source breadth-first fill across the whole grid
    let mut queue: VecDeque<usize> = (0..width * height).filter(|&i| color[i].is_some()).collect();
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % width, i / width);
        let c = color[i];
        let mut visit = |j: usize| {
            if color[j].is_none() {
                color[j] = c;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < width {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - width);
        }
        if y + 1 < height {
            visit(i + width);
        }
    }
    for &texel in &texels {
        let c = color[texel].expect("grid is connected");
        map.set_channels(texel, channel::COLOR, &c.map(logit))?;
    }
    Ok(map)
}
