//! Central finite differences with boundary-aware step control, plus the
//! rasterizer activity signature used to detect discontinuities.

#![allow(dead_code)]

use hgs_core::fit::render_raw;
use hgs_core::fixtures::RandomScene;
use hgs_core::gsplat::RAW_CHANNELS;
use hgs_core::render::{
    project_gaussians, rasterize_with_state, ImageF64, TILE_SIZE, ALPHA_MAX, ALPHA_MIN,
};

pub const H0: f64 = 1e-4;
pub const H_MIN: f64 = 1e-7;

#[derive(Debug, Clone, Default)]
pub struct CheckStats {
    pub checked: usize,
    /// Coordinates where every step size straddled a discontinuity.
    pub skipped: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl CheckStats {
    pub fn merge(&mut self, other: &CheckStats) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        if other.max_rel > self.max_rel {
            self.max_rel = other.max_rel;
            self.worst = other.worst.clone();
        }
    }
}

pub fn rel_err(a: f64, f: f64, floor: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(floor)
}

/// Central difference of `f` along coordinate `i`. The step shrinks by 10×
/// whenever the signature at `x ± h` differs from the one at `x`; returns
/// `None` if no step down to [`H_MIN`] keeps it constant.
pub fn central<S: PartialEq>(f: &dyn Fn(&[f64]) -> (f64, S), x: &[f64], i: usize) -> Option<f64> {
    let (_, base) = f(x);
    let mut h = H0;
    let mut xp = x.to_vec();
    while h >= H_MIN * 0.999 {
        xp[i] = x[i] + h;
        let (fp, sp) = f(&xp);
        xp[i] = x[i] - h;
        let (fm, sm) = f(&xp);
        if sp == base && sm == base {
            return Some((fp - fm) / (2.0 * h));
        }
        h /= 10.0;
    }
    None
}

/// Compares `analytic` against central differences on the given coordinates.
pub fn check<S: PartialEq>(
    label: &str,
    f: &dyn Fn(&[f64]) -> (f64, S),
    x: &[f64],
    analytic: &[f64],
    coords: impl Iterator<Item = usize>,
    floor: f64,
) -> CheckStats {
    let mut stats = CheckStats::default();
    for i in coords {
        match central(f, x, i) {
            Some(fd) => {
                stats.checked += 1;
                let e = rel_err(analytic[i], fd, floor);
                if e > stats.max_rel {
                    stats.max_rel = e;
                    stats.worst = format!("{label}[{i}] analytic {:.6e} fd {fd:.6e}", analytic[i]);
                }
            }
            None => stats.skipped += 1,
        }
    }
    stats
}

/// Every branch decision the forward pass takes: tile membership, per
/// pixel/splat skip and clamp outcomes, and early termination.
pub fn raster_signature(scene: &RandomScene, raw: &[f64]) -> Vec<u32> {
    let posed = scene.basis.decode(raw).expect("decodes").to_posed();
    let frame = project_gaussians(&posed, &scene.camera);
    let out = rasterize_with_state(&frame, &scene.camera, [1.0; 3]);
    let state = &out.state;
    let w = scene.camera.width as usize;
    let h = scene.camera.height as usize;
    let tiles_x = w.div_ceil(TILE_SIZE);
    let mut sig: Vec<u32> = frame.splats.iter().map(|s| s.source as u32).collect();
    for list in state.tile_lists() {
        sig.push(u32::MAX);
        sig.extend_from_slice(list);
    }
    for y in 0..h {
        for x in 0..w {
            let list = &state.tile_lists()[(y / TILE_SIZE) * tiles_x + x / TILE_SIZE];
            sig.push(state.contributor_end()[y * w + x]);
            for &idx in list {
                let s = &frame.splats[idx as usize];
                let [a, b, c] = s.cov2d;
                let det = a * c - b * b;
                let (dx, dy) = (x as f64 - s.mean2d[0], y as f64 - s.mean2d[1]);
                let power = -0.5 * (c * dx * dx + a * dy * dy) / det + b * dx * dy / det;
                let alpha = s.opacity * power.exp();
                sig.push(if power > 0.0 {
                    0
                } else if alpha < ALPHA_MIN {
                    1
                } else if alpha > ALPHA_MAX {
                    3
                } else {
                    2
                });
            }
        }
    }
    sig
}

/// Sign of `pred − target` per RGB value (the L1 kinks).
pub fn l1_signature(pred: &ImageF64, target: &ImageF64) -> Vec<i8> {
    let (pc, tc) = (pred.channels(), target.channels());
    pred.data()
        .chunks_exact(pc)
        .zip(target.data().chunks_exact(tc))
        .flat_map(|(p, t)| (0..3).map(move |c| (p[c] - t[c]).partial_cmp(&0.0).map_or(0, |o| o as i8)))
        .collect()
}

/// Checks the full raw → image → loss chain of a random scene against a target.
pub fn check_scene(
    label: &str,
    scene: &RandomScene,
    target: &ImageF64,
    lambda_ssim: f64,
    floor: f64,
) -> CheckStats {
    use hgs_core::fit::view_objective;
    let (_, analytic) =
        view_objective(&scene.basis, &scene.raw, &scene.camera, target, lambda_ssim, [1.0; 3]).expect("objective");
    let f = |x: &[f64]| {
        let (v, _) = view_objective(&scene.basis, x, &scene.camera, target, lambda_ssim, [1.0; 3]).expect("objective");
        let pred = render_raw(&scene.basis, x, &scene.camera, [1.0; 3]).expect("render");
        (v.total, (raster_signature(scene, x), l1_signature(&pred, target)))
    };
    let n = scene.raw.len();
    debug_assert_eq!(n % RAW_CHANNELS, 0);
    check(label, &f, &scene.raw, &analytic, 0..n, floor)
}
