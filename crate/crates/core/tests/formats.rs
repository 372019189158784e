use std::path::Path;

use hgs_core::body::SkinnedTemplate;
use hgs_core::diffusion::LatentTensor;
use hgs_core::fixtures::{procedural_target_map, random_scene, test_humanoid};
use hgs_core::gsplat::{PosedGaussians, UvAttributeMap};
use hgs_core::pipeline::{generate_rig, CameraRigSpec};
use hgs_core::render::{render, Camera, ImageBuffer, DEFAULT_BACKGROUND};

/// Saves, loads and saves again; both files must be byte-identical.
fn second_write_identical<T>(
    dir: &Path,
    name: &str,
    value: &T,
    save: impl Fn(&T, &Path) -> hgs_core::Result<()>,
    load: impl Fn(&Path) -> hgs_core::Result<T>,
) -> T {
    let (a, b) = (dir.join(format!("{name}.1")), dir.join(format!("{name}.2")));
    save(value, &a).unwrap();
    let loaded = load(&a).unwrap();
    save(&loaded, &b).unwrap();
    let (first, second) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let diff = first.iter().zip(&second).position(|(x, y)| x != y);
    assert!(
        first == second,
        "{name}: lengths {} / {}, first difference at {diff:?}",
        first.len(),
        second.len()
    );
    loaded
}

fn corrupted_inputs_fail<T>(dir: &Path, name: &str, load: impl Fn(&Path) -> hgs_core::Result<T>) {
    let bytes = std::fs::read(dir.join(format!("{name}.1"))).unwrap();
    let bad = dir.join(format!("{name}.bad"));
    std::fs::write(&bad, &bytes[..bytes.len() - 1]).unwrap();
    assert!(load(&bad).is_err(), "{name}: truncated");
    let mut flipped = bytes.clone();
    flipped[0] ^= 0xff;
    std::fs::write(&bad, &flipped).unwrap();
    assert!(load(&bad).is_err(), "{name}: magic");
    assert!(load(&dir.join("missing")).is_err(), "{name}: missing");
}

#[test]
fn asset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = random_scene(4, 40, 32);
    let asset = s.basis.decode(&s.raw).unwrap().to_posed();
    let loaded = second_write_identical(dir.path(), "asset", &asset, PosedGaussians::save, PosedGaussians::load);
    assert_eq!(loaded.len(), asset.len());
    // values pass through f32 storage
    for (a, b) in loaded.positions.iter().zip(&asset.positions) {
        assert!((a - b).norm() < 1e-6);
    }
    corrupted_inputs_fail(dir.path(), "asset", PosedGaussians::load);
}

#[test]
fn uv_map_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let template = test_humanoid();
    let map = procedural_target_map(&template, 32, 32).unwrap();
    let loaded = second_write_identical(dir.path(), "map", &map, UvAttributeMap::save, UvAttributeMap::load);
    assert_eq!(loaded.mask(), map.mask());
    assert_eq!(loaded.bindings().iter().flatten().map(|b| b.face).collect::<Vec<_>>(),
        map.bindings().iter().flatten().map(|b| b.face).collect::<Vec<_>>());
    corrupted_inputs_fail(dir.path(), "map", UvAttributeMap::load);
}

#[test]
fn camera_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for (k, cam) in generate_rig(&CameraRigSpec::default()).unwrap().iter().enumerate().step_by(7) {
        let loaded = second_write_identical(dir.path(), &format!("cam{k}"), cam, Camera::save, Camera::load);
        assert_eq!(&loaded, cam);
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"fx\": 1.0}").unwrap();
    assert!(Camera::load(&bad).is_err());
}

#[test]
fn latent_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let z = LatentTensor::randn(64, 64, 16, 3);
    let loaded = second_write_identical(dir.path(), "latent", &z, LatentTensor::save, LatentTensor::load);
    assert_eq!(loaded, z);
    corrupted_inputs_fail(dir.path(), "latent", LatentTensor::load);
}

#[test]
fn template_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let t = test_humanoid();
    let loaded = second_write_identical(dir.path(), "template", &t, SkinnedTemplate::save, SkinnedTemplate::load);
    assert_eq!(loaded.faces(), t.faces());
    assert_eq!(loaded.joints(), t.joints());
    corrupted_inputs_fail(dir.path(), "template", SkinnedTemplate::load);
}

#[test]
fn png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = random_scene(9, 20, 40);
    let posed = s.basis.decode(&s.raw).unwrap().to_posed();
    let image = render(&posed, &s.camera, DEFAULT_BACKGROUND).1.image.to_f32();
    let save = |img: &ImageBuffer, p: &Path| img.save_png(p);
    let loaded = second_write_identical(dir.path(), "png", &image, save, ImageBuffer::load_png);
    assert_eq!((loaded.width(), loaded.height()), (40, 40));
    for (a, b) in loaded.data().iter().zip(image.data()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
    }
}
