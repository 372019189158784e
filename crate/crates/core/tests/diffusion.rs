use hgs_core::diffusion::{
    cfg_combine, from_v, make_schedule, q_sample, rmsnorm, rope_2d, sample, sample_with_trace, v_target,
    GaussianDenoiser, LatentTensor, NoiseSchedule, PointMassDenoiser, SamplerConfig, ScheduleKind,
};
use proptest::prelude::*;

fn rel(a: &LatentTensor, b: &LatentTensor) -> f64 {
    let diff: f64 = a.data().iter().zip(b.data()).map(|(x, y)| ((x - y) as f64).powi(2)).sum();
    diff.sqrt() / b.norm().max(1e-30)
}

fn schedules() -> Vec<NoiseSchedule> {
    [ScheduleKind::Linear, ScheduleKind::Cosine].map(|k| make_schedule(1000, k).unwrap()).to_vec()
}

#[test]
fn q_sample_v_target_from_v_round_trip() {
    let x0 = LatentTensor::randn(16, 16, 4, 11);
    let eps = LatentTensor::randn(16, 16, 4, 12);
    for sched in schedules() {
        for t in [1, 2, 10, 250, 500, 750, 999, 1000] {
            let x_t = q_sample(&x0, t, &eps, &sched).unwrap();
            let v = v_target(&x0, &eps, t, &sched).unwrap();
            let (x0_hat, eps_hat) = from_v(&x_t, &v, t, &sched).unwrap();
            assert!(rel(&x0_hat, &x0) <= 1e-5, "{:?} t={t} x0 {}", sched.kind, rel(&x0_hat, &x0));
            assert!(rel(&eps_hat, &eps) <= 1e-5, "{:?} t={t} eps {}", sched.kind, rel(&eps_hat, &eps));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn round_trip_holds_for_any_seed_and_step(seed in 0u64..1_000_000, t in 1usize..=1000, cosine in any::<bool>()) {
        let kind = if cosine { ScheduleKind::Cosine } else { ScheduleKind::Linear };
        let sched = make_schedule(1000, kind).unwrap();
        let x0 = LatentTensor::randn(4, 4, 3, seed);
        let eps = LatentTensor::randn(4, 4, 3, seed ^ 0x5eed);
        let x_t = q_sample(&x0, t, &eps, &sched).unwrap();
        let v = v_target(&x0, &eps, t, &sched).unwrap();
        let (x0_hat, _) = from_v(&x_t, &v, t, &sched).unwrap();
        prop_assert!(rel(&x0_hat, &x0) <= 1e-5);
    }
}

#[test]
fn point_mass_recovered_at_30_steps_with_guidance() {
    for sched in schedules() {
        let target = LatentTensor::randn(8, 8, 16, 3);
        let d = PointMassDenoiser { target: target.clone(), schedule: sched.clone() };
        let cfg = SamplerConfig { steps: 30, cfg_scale: 3.5, seed: 9 };
        let mut records = Vec::new();
        let out = sample_with_trace(&d, Some(&[0.5, -0.5]), target.shape(), &cfg, &sched, &mut |r| {
            records.push(r.clone())
        })
        .unwrap();
        let worst = out.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(worst < 1e-4, "{:?}: {worst}", sched.kind);
        assert_eq!(records.len(), 30);
        assert_eq!(records[0].t, 1000);
        assert_eq!(records[29].t_next, 0);
    }
}

#[test]
fn point_mass_recovered_when_every_step_is_visited() {
    let sched = make_schedule(1000, ScheduleKind::Linear).unwrap();
    let target = LatentTensor::randn(4, 4, 2, 5);
    let d = PointMassDenoiser { target: target.clone(), schedule: sched.clone() };
    let cfg = SamplerConfig { steps: 1000, cfg_scale: 1.0, seed: 1 };
    let out = sample(&d, None, target.shape(), &cfg, &sched).unwrap();
    let worst = out.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn sampler_is_seed_deterministic() {
    let sched = make_schedule(1000, ScheduleKind::Cosine).unwrap();
    let d = GaussianDenoiser { mean: 0.3, std: 0.5, schedule: sched.clone() };
    let cfg = SamplerConfig { steps: 30, cfg_scale: 3.5, seed: 77 };
    let a = sample(&d, Some(&[1.0]), (4, 4, 4), &cfg, &sched).unwrap();
    let b = sample(&d, Some(&[1.0]), (4, 4, 4), &cfg, &sched).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    let c = sample(&d, Some(&[1.0]), (4, 4, 4), &SamplerConfig { seed: 78, ..cfg }, &sched).unwrap();
    assert_ne!(a.to_bytes(), c.to_bytes());
}

/// Each latent entry is an independent sampler run: the Gaussian denoiser acts
/// entrywise and the starting noise is i.i.d.
#[test]
fn gaussian_target_matches_mean_and_variance_within_three_standard_errors() {
    let (mean, std) = (0.7, 0.4);
    let sched = make_schedule(1000, ScheduleKind::Linear).unwrap();
    let d = GaussianDenoiser { mean, std, schedule: sched.clone() };
    let cfg = SamplerConfig { steps: 1000, cfg_scale: 1.0, seed: 2024 };
    let out = sample(&d, None, (100, 100, 1), &cfg, &sched).unwrap();
    let n = out.len() as f64;
    assert_eq!(n, 1e4);
    let xs: Vec<f64> = out.data().iter().map(|&v| v as f64).collect();
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let se_mean = std / n.sqrt();
    let se_var = std * std * (2.0 / (n - 1.0)).sqrt();
    assert!((m - mean).abs() < 3.0 * se_mean, "mean {m} vs {mean}, se {se_mean}");
    assert!((var - std * std).abs() < 3.0 * se_var, "var {var} vs {}, se {se_var}", std * std);
}

#[test]
fn cfg_is_affine_in_the_scale() {
    let u = LatentTensor::from_data(1, 2, 2, vec![0.5, -1.25, 2.0, 0.0]).unwrap();
    let c = LatentTensor::from_data(1, 2, 2, vec![1.5, 0.75, -2.0, 0.25]).unwrap();
    assert_eq!(cfg_combine(&u, &c, 0.0).unwrap(), u);
    assert_eq!(cfg_combine(&u, &c, 1.0).unwrap(), c);
    let g = cfg_combine(&u, &c, 3.5).unwrap();
    assert_eq!(g.data(), &[4.0, 5.75, -12.0, 0.875]);
    // midpoint of two scales is the combination at the mid scale
    let (a, b) = (cfg_combine(&u, &c, 2.0).unwrap(), cfg_combine(&u, &c, 5.0).unwrap());
    assert_eq!(a.zip_with(&b, |x, y| (x + y) / 2.0).unwrap(), g);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn rope_preserves_norm(tok in prop::collection::vec(-3.0f64..3.0, 32), r in -64.0f64..64.0, c in -64.0f64..64.0) {
        let out = rope_2d(&[tok.clone()], &[(r, c)]).unwrap();
        prop_assert!((dot(&out[0], &out[0]).sqrt() - dot(&tok, &tok).sqrt()).abs() <= 1e-6);
    }

    #[test]
    fn rope_dot_products_depend_only_on_offsets(
        q in prop::collection::vec(-2.0f64..2.0, 16),
        k in prop::collection::vec(-2.0f64..2.0, 16),
        p in (-32.0f64..32.0, -32.0f64..32.0, -32.0f64..32.0, -32.0f64..32.0),
        shift in (-32.0f64..32.0, -32.0f64..32.0),
    ) {
        let (r1, c1, r2, c2) = p;
        let a = rope_2d(&[q.clone(), k.clone()], &[(r1, c1), (r2, c2)]).unwrap();
        let b = rope_2d(&[q, k], &[(r1 + shift.0, c1 + shift.1), (r2 + shift.0, c2 + shift.1)]).unwrap();
        prop_assert!((dot(&a[0], &a[1]) - dot(&b[0], &b[1])).abs() <= 1e-6);
    }

    #[test]
    fn rmsnorm_is_scale_invariant(x in prop::collection::vec(-5.0f64..5.0, 1..64), scale in 0.01f64..100.0) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let gain: Vec<f64> = (0..x.len()).map(|i| 0.5 + i as f64 * 0.1).collect();
        let scaled: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let a = rmsnorm(&x, &gain, 0.0).unwrap();
        let b = rmsnorm(&scaled, &gain, 0.0).unwrap();
        for (u, v) in a.iter().zip(&b) {
            prop_assert!((u - v).abs() <= 1e-6);
        }
        let unit = rmsnorm(&x, &vec![1.0; x.len()], 0.0).unwrap();
        let rms = (dot(&unit, &unit) / x.len() as f64).sqrt();
        prop_assert!((rms - 1.0).abs() <= 1e-9);
    }
}
