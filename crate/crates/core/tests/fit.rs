use hgs_core::body::{Joint, SkinWeights, SkinnedTemplate};
use hgs_core::fit::{fit_map, fit_subject, render_raw, FitConfig, LrMultipliers};
use hgs_core::fixtures::self_consistency;
use hgs_core::gsplat::{channel, DecodeBasis, UvAttributeMap};
use hgs_core::math::sigmoid;
use hgs_core::render::{Camera, ImageBuffer, DEFAULT_BACKGROUND};
use hgs_core::Error;
use nalgebra::Vector3;

fn toy_template() -> SkinnedTemplate {
    SkinnedTemplate::new(
        vec![Vector3::new(-0.05, -0.05, 0.0), Vector3::new(0.05, -0.05, 0.0), Vector3::new(-0.05, 0.05, 0.0)],
        vec![[0, 1, 2]],
        vec![[[0.1, 0.1], [1.0, 0.1], [0.1, 1.0]]],
        vec![Joint { name: "root".into(), rest_position: [0.0; 3], parent: None }],
        vec![SkinWeights::single(0); 3],
    )
    .unwrap()
}

fn toy_camera() -> Camera {
    Camera::look_at(&Vector3::new(0.0, 0.0, 0.6), &Vector3::zeros(), &Vector3::y(), 48.0, 48.0, 32, 32).unwrap()
}

#[test]
fn single_splat_color_is_recovered() {
    let template = toy_template();
    let mut target_map = UvAttributeMap::from_template(&template, 1, 1).unwrap();
    assert_eq!(target_map.valid_count(), 1);
    let want = [0.3, 0.75, 0.1];
    let raw_color: Vec<f64> = want.iter().map(|c: &f64| (c / (1.0 - c)).ln()).collect();
    target_map.set_channels(0, channel::OPACITY, &[4.0]).unwrap();
    target_map.set_channels(0, channel::COLOR, &raw_color).unwrap();
    let basis = DecodeBasis::new(&target_map, &template).unwrap();
    let camera = toy_camera();
    let target = render_raw(&basis, &target_map.gather_valid(), &camera, DEFAULT_BACKGROUND).unwrap().to_f32();

    let mut init = UvAttributeMap::from_template(&template, 1, 1).unwrap();
    init.set_channels(0, channel::OPACITY, &[4.0]).unwrap();
    // only color moves, so the objective is convex in the fitted parameters
    let config = FitConfig {
        iterations: 200,
        learning_rate: 0.02,
        lr_multipliers: LrMultipliers { position: 0.0, scale: 0.0, rotation: 0.0, opacity: 0.0, color: 1.0 },
        weight_decay: 0.0,
        uv_width: 1,
        uv_height: 1,
        ..FitConfig::default()
    };
    let (map, report) = fit_map(&template, init, &[(camera, target)], &config, &mut |_| {}).unwrap();
    let got: Vec<f64> = map.texel(0)[channel::COLOR..channel::COLOR + 3].iter().map(|&r| sigmoid(r)).collect();
    for c in 0..3 {
        assert!((got[c] - want[c]).abs() < 1e-3, "{got:?} vs {want:?}");
    }
    assert!(report.loss_curve[199] < report.loss_curve[0] * 1e-2);
}

#[test]
fn known_map_is_a_fixed_point() {
    let fx = self_consistency(16, 64).unwrap();
    let mut config = fx.fit_config(3);
    config.eval_views.clear();
    let (_, report) = fit_map(&fx.template, fx.target_map.clone(), &fx.targets, &config, &mut |_| {}).unwrap();
    // targets are stored as f32, so the residual is rounding only
    assert!(report.loss_curve[0] < 1e-6, "{}", report.loss_curve[0]);
    assert!(report.iterations[0].psnr > 100.0);
}

#[test]
fn fits_are_deterministic_for_a_fixed_seed() {
    let fx = self_consistency(16, 48).unwrap();
    let config = FitConfig { seed: 5, ..fx.fit_config(8) };
    let (a, ra) = fit_subject(&fx.template, &fx.targets, &config).unwrap();
    let (b, rb) = fit_subject(&fx.template, &fx.targets, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.loss_curve, rb.loss_curve);
    assert_eq!(ra.to_json(), rb.to_json());
    let views: Vec<_> = ra.iterations.iter().map(|r| r.views.clone()).collect();
    assert!(views.iter().all(|v| v.len() == 2 && v[0] < v[1] && v[1] < fx.input_views.len()));
    let (_, rc) = fit_subject(&fx.template, &fx.targets, &FitConfig { seed: 6, ..config }).unwrap();
    assert_ne!(views, rc.iterations.iter().map(|r| r.views.clone()).collect::<Vec<_>>());
}

#[test]
fn non_finite_target_aborts_with_report() {
    let fx = self_consistency(8, 32).unwrap();
    let mut targets = fx.targets.clone();
    let (w, h) = (targets[0].1.width(), targets[0].1.height());
    targets[0].1 = ImageBuffer::filled(w, h, &[f32::NAN, 0.0, 0.0]);
    let config = FitConfig { input_views: vec![0], eval_views: vec![], ..fx.fit_config(10) };
    match fit_subject(&fx.template, &targets, &config) {
        Err(Error::Diverged { iteration, report }) => {
            assert_eq!(iteration, 0);
            assert_eq!(report.iterations.len(), 1);
            assert!(!report.loss_curve[0].is_finite());
        }
        other => panic!("expected divergence, got {:?}", other.map(|(_, r)| r.loss_curve)),
    }
}

#[test]
fn zero_iterations_return_the_initialization() {
    let fx = self_consistency(8, 32).unwrap();
    let (map, report) = fit_map(&fx.template, fx.target_map.clone(), &fx.targets, &fx.fit_config(0), &mut |_| {}).unwrap();
    assert_eq!(map, fx.target_map);
    assert!(report.loss_curve.is_empty());
    assert_eq!(report.eval.len(), fx.eval_views.len());
    assert!(report.mean_eval_psnr > 100.0);
}

#[test]
fn empty_targets_are_rejected() {
    let fx = self_consistency(8, 32).unwrap();
    assert!(fit_subject(&fx.template, &[], &fx.fit_config(1)).is_err());
    let bad = FitConfig { eval_views: vec![99], ..fx.fit_config(1) };
    assert!(fit_subject(&fx.template, &fx.targets, &bad).is_err());
}

#[test]
fn windowed_median_loss_decreases() {
    let fx = self_consistency(24, 64).unwrap();
    let (_, report) = fit_subject(&fx.template, &fx.targets, &fx.fit_config(300)).unwrap();
    let median = |w: &[f64]| {
        let mut v = w.to_vec();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let medians: Vec<f64> = report.loss_curve.chunks(100).map(median).collect();
    assert!(medians.windows(2).all(|m| m[1] <= m[0]), "{medians:?}");
    assert!(medians[2] < 0.5 * medians[0], "{medians:?}");
}
