mod support;

use hgs_core::fit::{loss_kl, loss_l1, loss_ssim};
use hgs_core::fixtures::random_scene;
use hgs_core::render::ImageF64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::fd;

const TOL: f64 = 1e-3;

fn smooth_target(w: usize, h: usize, seed: u64) -> ImageF64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b): (f64, f64) = (rng.random_range(0.05..0.2), rng.random_range(0.05..0.2));
    let mut img = ImageF64::new(w, h, 3);
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel_mut(x, y);
            p[0] = 0.5 + 0.4 * (a * x as f64).sin();
            p[1] = 0.5 + 0.4 * (b * y as f64).cos();
            p[2] = 0.5 + 0.3 * (a * (x + y) as f64).sin();
        }
    }
    img
}

#[test]
fn render_chain_matches_finite_differences() {
    let mut total = fd::CheckStats::default();
    for seed in 0..3 {
        let scene = random_scene(seed, 8, 32);
        let target = smooth_target(32, 32, seed);
        let stats = fd::check_scene(&format!("scene{seed}"), &scene, &target, 0.2, 1e-8);
        total.merge(&stats);
    }
    eprintln!("{total:?}");
    assert!(total.checked > 200, "{total:?}");
    assert!(total.max_rel < TOL, "{total:?}");
}

#[test]
fn image_losses_match_finite_differences() {
    let (w, h) = (16, 14);
    let pred = smooth_target(w, h, 7);
    let target = smooth_target(w, h, 8);
    let wrap = |x: &[f64]| ImageF64::from_data(w, h, 3, x.to_vec()).unwrap();
    let ssim = |x: &[f64]| (loss_ssim(&wrap(x), &target).unwrap().value, ());
    let g = loss_ssim(&pred, &target).unwrap().grad;
    let s = fd::check("ssim", &ssim, pred.data(), g.data(), 0..w * h * 3, 1e-10);
    assert!(s.max_rel < TOL && s.skipped == 0, "{s:?}");

    let l1 = |x: &[f64]| (loss_l1(&wrap(x), &target).unwrap().value, fd::l1_signature(&wrap(x), &target));
    let g = loss_l1(&pred, &target).unwrap().grad;
    let s = fd::check("l1", &l1, pred.data(), g.data(), 0..w * h * 3, 1e-10);
    assert!(s.max_rel < TOL, "{s:?}");
}

#[test]
fn kl_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 20;
    let x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let f = |v: &[f64]| (loss_kl(&v[..n], &v[n..]).unwrap().value, ());
    let k = loss_kl(&x[..n], &x[n..]).unwrap();
    let analytic: Vec<f64> = k.grad_mean.iter().chain(&k.grad_log_variance).copied().collect();
    let s = fd::check("kl", &f, &x, &analytic, 0..2 * n, 1e-10);
    assert!(s.max_rel < TOL, "{s:?}");
}
