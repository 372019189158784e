use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use hgs_core::body::{forward_kinematics, procedural_humanoid, HumanoidParams, Pose, SkinnedTemplate};
use hgs_core::diffusion::{
    make_schedule, sample_with_trace, Denoiser, GaussianDenoiser, LatentTensor, PointMassDenoiser, SamplerConfig,
    ScheduleKind,
};
use hgs_core::fit::{fit_map, mse, psnr_from_mse, ssim, FitConfig};
use hgs_core::fixtures::self_consistency;
use hgs_core::gsplat::{decode_uv, pose_gaussians, DecodeBasis, PosedGaussians, UvAttributeMap};
use hgs_core::pipeline::{
    batch_render, canonicalize as remove_root, decanonicalize, evenly_spaced, generate_rig, init_uv_map, view_name,
    BatchOptions, DEFAULT_INIT_VIEWS,
};
use hgs_core::render::{project_gaussians, rasterize, ImageBuffer, DEFAULT_BACKGROUND};
use hgs_core::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::data::{create_dir, create_parent, load_cameras, load_views, write_file, Split, SPLIT_FILE};
use crate::{
    CanonicalizeArgs, FitArgs, FixtureArgs, FixtureDenoiser, Global, InitUvArgs, MetricsArgs, PoseArgs, RenderArgs,
    RigArgs, SampleArgs, TemplateArgs,
};

/// JSON number, or `"inf"`/`"-inf"`/`"nan"` where JSON has none.
fn metric(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn fit_defaults(g: &Global) -> FitConfig {
    g.file.fit.clone().unwrap_or_default()
}

pub fn template(g: &Global, a: TemplateArgs) -> Result<ExitCode> {
    let defaults = HumanoidParams::default();
    let params = HumanoidParams {
        segments: a.segments.unwrap_or(defaults.segments),
        rings: a.rings.unwrap_or(defaults.rings),
        ..defaults
    };
    if params.segments < 3 || params.rings < 2 {
        bail!("template needs at least 3 segments and 2 rings");
    }
    let t = procedural_humanoid(&params);
    create_parent(&a.out)?;
    t.save(&a.out)?;
    let summary = json!({
        "path": a.out.display().to_string(),
        "vertices": t.vertices().len(),
        "faces": t.faces().len(),
        "joints": t.joint_count(),
    });
    if g.json {
        print_json(&summary);
    } else {
        println!("wrote {}: {} vertices, {} faces, {} joints", a.out.display(), t.vertices().len(), t.faces().len(), t.joint_count());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn rig(g: &Global, a: RigArgs) -> Result<ExitCode> {
    let mut spec = g.file.rig.clone().unwrap_or_default();
    if let Some(r) = a.radius {
        spec.rings.iter_mut().for_each(|ring| ring.radius = r);
    }
    let mut cams = generate_rig(&spec)?;
    if let Some(size) = a.size {
        if size == 0 {
            bail!("--size must be positive");
        }
        cams = cams.iter().map(|c| c.resized(size, size)).collect();
    }
    create_dir(&a.out)?;
    for (i, cam) in cams.iter().enumerate() {
        cam.save(&a.out.join(format!("{}.json", view_name(i))))?;
    }
    if g.json {
        print_json(&json!({ "cameras": cams.len(), "rings": spec.rings, "out": a.out.display().to_string() }));
    } else {
        println!("wrote {} cameras to {}", cams.len(), a.out.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn render(g: &Global, a: RenderArgs) -> Result<ExitCode> {
    let asset = PosedGaussians::load(&a.asset)?;
    let mut cams: Vec<_> = load_cameras(&a.cameras)?.into_iter().map(|(_, c)| c).collect();
    if let Some(n) = a.views {
        cams = evenly_spaced(cams.len(), n).into_iter().map(|i| cams[i].clone()).collect();
    }
    let options = BatchOptions {
        asset_id: a.asset_id,
        source: a.asset.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        background: a.background.unwrap_or(DEFAULT_BACKGROUND),
        ..BatchOptions::default()
    };
    let manifest = batch_render(&asset, &cams, &a.out, &options)?;
    let failed: Vec<_> = manifest.entries().filter(|e| e.error.is_some()).collect();
    if g.json {
        println!("{}", manifest.to_json());
    } else {
        println!("rendered {} views of {} gaussians to {}", manifest.renders.len(), asset.len(), a.out.display());
    }
    if !failed.is_empty() {
        for e in &failed {
            eprintln!("error: {}: {}", e.path, e.error.as_deref().unwrap_or_default());
        }
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn canonicalize(g: &Global, a: CanonicalizeArgs) -> Result<ExitCode> {
    let asset = PosedGaussians::load(&a.asset)?;
    let (r, t) = (a.rotation, a.translation);
    let out = if a.inverse { decanonicalize(&asset, r, t) } else { remove_root(&asset, r, t) };
    create_parent(&a.out)?;
    out.save(&a.out)?;
    if g.json {
        print_json(&json!({ "gaussians": out.len(), "rotation": r, "translation": t, "inverse": a.inverse }));
    } else {
        println!("wrote {} gaussians to {}", out.len(), a.out.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn init_uv(g: &Global, a: InitUvArgs) -> Result<ExitCode> {
    let template = SkinnedTemplate::load(&a.template)?;
    let views = load_views(&a.targets)?;
    let defaults = fit_defaults(g);
    let (w, h) = a.uv_size.map_or((defaults.uv_width, defaults.uv_height), |s| (s, s));
    let map = init_uv_map(&template, &views, a.views.unwrap_or(DEFAULT_INIT_VIEWS), w, h)?;
    create_parent(&a.out)?;
    map.save(&a.out)?;
    if g.json {
        print_json(&json!({ "texels": map.valid_count(), "width": w, "height": h, "views": views.len() }));
    } else {
        println!("wrote {}×{} map with {} texels to {}", w, h, map.valid_count(), a.out.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn fixture(g: &Global, a: FixtureArgs) -> Result<ExitCode> {
    let fx = self_consistency(a.uv_size, a.image_size)?;
    for sub in ["cameras", "renders"] {
        create_dir(&a.out.join(sub))?;
    }
    fx.template.save(&a.out.join("template.hgtp"))?;
    fx.target_map.save(&a.out.join("target_map.hguv"))?;
    for (i, (cam, img)) in fx.targets.iter().enumerate() {
        let name = view_name(i);
        cam.save(&a.out.join(format!("cameras/{name}.json")))?;
        img.save_png(&a.out.join(format!("renders/{name}.png")))?;
    }
    let split = Split { input: fx.input_views.clone(), eval: fx.eval_views.clone() };
    write_file(&a.out.join(SPLIT_FILE), serde_json::to_string_pretty(&split)?)?;
    if g.json {
        print_json(&json!({ "views": fx.targets.len(), "split": split, "texels": fx.target_map.valid_count() }));
    } else {
        println!("wrote {} views ({} input, {} held out) to {}", fx.targets.len(), split.input.len(), split.eval.len(), a.out.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn fit(g: &Global, a: FitArgs) -> Result<ExitCode> {
    let mut config = fit_defaults(g);
    if let Some(n) = a.iterations {
        config.iterations = n;
    }
    if let Some(s) = a.uv_size {
        config.uv_width = s;
        config.uv_height = s;
    }
    if let Some(lr) = a.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(l) = a.lambda_ssim {
        config.lambda_ssim = l;
    }
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    let split = Split::load_if_present(&a.targets)?;
    match (a.views, &split) {
        (Some(v), _) => config.input_views = v,
        (None, Some(s)) if config.input_views.is_empty() => config.input_views = s.input.clone(),
        _ => {}
    }
    match (a.eval_views, &split) {
        (Some(v), _) => config.eval_views = v,
        (None, Some(s)) if config.eval_views.is_empty() => config.eval_views = s.eval.clone(),
        _ => {}
    }
    config.validate()?;

    let template = SkinnedTemplate::load(&a.template)?;
    let targets = load_views(&a.targets)?;
    let init = if let Some(path) = &a.init {
        UvAttributeMap::load(path)?
    } else if a.init_uv {
        let inputs: Vec<_> = if config.input_views.is_empty() {
            (0..targets.len()).filter(|v| !config.eval_views.contains(v)).map(|v| targets[v].clone()).collect()
        } else {
            config.input_views.iter().filter_map(|&v| targets.get(v).cloned()).collect()
        };
        init_uv_map(&template, &inputs, DEFAULT_INIT_VIEWS, config.uv_width, config.uv_height)?
    } else {
        UvAttributeMap::from_template(&template, config.uv_width, config.uv_height)?
    };
    create_dir(&a.out)?;

    let every = a.log_every.max(1);
    let last = config.iterations.saturating_sub(1);
    let json_mode = g.json;
    let mut progress = |r: &hgs_core::fit::IterationRecord| {
        if r.iteration % every == 0 || r.iteration == last || !r.loss.is_finite() {
            let line = format!("iter {} loss {:.6} psnr {:.3}", r.iteration, r.loss, r.psnr);
            if json_mode {
                log::info!("{line}");
            } else {
                println!("{line}");
            }
        }
    };
    let report_path = a.out.join("report.json");
    match fit_map(&template, init, &targets, &config, &mut progress) {
        Ok((map, report)) => {
            map.save(&a.out.join("map.hguv"))?;
            decode_uv(&map, &template)?.to_posed().save(&a.out.join("asset.hgsa"))?;
            write_file(&report_path, report.to_json())?;
            if json_mode {
                println!("{}", report.to_json());
            } else {
                for e in &report.eval {
                    println!("eval view {} psnr {:.3} ssim {:.4}", e.view, e.psnr, e.ssim);
                }
                if !report.eval.is_empty() {
                    println!("mean eval psnr {:.3}", report.mean_eval_psnr);
                }
                println!("wrote {}", a.out.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::Diverged { iteration, report }) => {
            write_file(&report_path, report.to_json())?;
            eprintln!("error: fit diverged at iteration {iteration}; report written to {}", report_path.display());
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.into()),
    }
}

fn load_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let poses = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    Ok(poses)
}

pub fn pose(g: &Global, a: PoseArgs) -> Result<ExitCode> {
    let template = SkinnedTemplate::load(&a.template)?;
    let map = UvAttributeMap::load(&a.map)?;
    let canonical = DecodeBasis::new(&map, &template)?.decode(&map.gather_valid())?;
    let poses = load_poses(&a.poses)?;
    let cams = load_cameras(&a.cameras)?;
    let mut frames = Vec::with_capacity(poses.len());
    for (f, pose) in poses.iter().enumerate() {
        let transforms = forward_kinematics(&template, pose).with_context(|| format!("pose {f}"))?;
        let posed = pose_gaussians(&canonical, &transforms)?;
        let dir = a.out.join(format!("frame_{f:03}"));
        create_dir(&dir)?;
        let pngs: Vec<_> = cams
            .par_iter()
            .map(|(_, cam)| rasterize(&project_gaussians(&posed, cam), cam, DEFAULT_BACKGROUND).to_png_bytes())
            .collect();
        let mut files = Vec::with_capacity(cams.len());
        for ((stem, _), png) in cams.iter().zip(pngs) {
            let rel = format!("frame_{f:03}/{stem}.png");
            write_file(&a.out.join(&rel), png?)?;
            files.push(rel);
        }
        if !g.json {
            println!("frame {f}: {} gaussians, {} views", posed.len(), files.len());
        }
        frames.push(json!({ "frame": f, "gaussians": posed.len(), "files": files }));
    }
    let summary = json!({ "frames": frames });
    write_file(&a.out.join("frames.json"), serde_json::to_string_pretty(&summary)?)?;
    if g.json {
        print_json(&summary);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn sample(g: &Global, a: SampleArgs) -> Result<ExitCode> {
    let kind: ScheduleKind = a.schedule.parse()?;
    let sched = make_schedule(a.train_steps, kind)?;
    let mut config: SamplerConfig = g.file.sampler.unwrap_or_default();
    if let Some(s) = a.steps {
        config.steps = s;
    }
    if let Some(c) = a.cfg_scale {
        config.cfg_scale = c;
    }
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    let requested = a.shape;
    if requested.0 == 0 || requested.1 == 0 || requested.2 == 0 {
        bail!("latent shape must be positive, got {requested:?}");
    }
    let target = match (&a.target, a.fixture) {
        (Some(path), _) => Some(LatentTensor::load(path)?),
        (None, FixtureDenoiser::PointMass) => {
            let (h, w, c) = requested;
            let t = LatentTensor::randn(h, w, c, config.seed.wrapping_add(1));
            let path = a.out.with_extension("target.hglt");
            t.save(&path)?;
            Some(t)
        }
        (None, FixtureDenoiser::Gaussian) => None,
    };
    if let Some(t) = &target {
        if t.shape() != requested {
            bail!("target latent has shape {:?} but the sampler shape is {:?}", t.shape(), requested);
        }
    }
    let denoiser: Box<dyn Denoiser> = match a.fixture {
        FixtureDenoiser::PointMass => Box::new(PointMassDenoiser {
            target: target.clone().expect("point-mass target"),
            schedule: sched.clone(),
        }),
        FixtureDenoiser::Gaussian => {
            if !(a.std > 0.0) {
                bail!("--std must be positive");
            }
            Box::new(GaussianDenoiser { mean: a.mean, std: a.std, schedule: sched.clone() })
        }
    };

    let header = format!(
        "steps={} cfg={} schedule={} train_steps={} seed={} shape={}x{}x{}",
        config.steps, config.cfg_scale, a.schedule, a.train_steps, config.seed, requested.0, requested.1, requested.2
    );
    if !g.json {
        println!("{header}");
    }
    let mut records = Vec::with_capacity(config.steps);
    let condition = [1.0f32];
    let out = sample_with_trace(denoiser.as_ref(), Some(&condition), requested, &config, &sched, &mut |r| {
        if !g.json {
            println!("step {} t {} -> {} x_norm {:.6} pred_norm {:.6}", r.index, r.t, r.t_next, r.x_norm, r.prediction_norm);
        }
        records.push(*r);
    })?;
    create_parent(&a.out)?;
    out.save(&a.out)?;

    let n = out.len() as f64;
    let mean = out.data().iter().map(|&v| v as f64).sum::<f64>() / n;
    let std = (out.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
    let max_err = target
        .as_ref()
        .map(|t| out.data().iter().zip(t.data()).map(|(a, b)| (a - b).abs() as f64).fold(0.0, f64::max));
    if g.json {
        print_json(&json!({
            "config": config,
            "schedule": a.schedule,
            "train_steps": a.train_steps,
            "steps": records,
            "mean": mean,
            "std": std,
            "max_abs_error": max_err,
        }));
    } else {
        println!("sample mean {mean:.6} std {std:.6}");
        if let Some(e) = max_err {
            println!("max_abs_error {e:.3e}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn metrics(_g: &Global, a: MetricsArgs) -> Result<ExitCode> {
    let pred = ImageBuffer::load_png(&a.pred)?.rgb_f64();
    let target = ImageBuffer::load_png(&a.target)?.rgb_f64();
    let m = mse(&pred, &target)?;
    let s = ssim(&pred, &target)?;
    print_json(&json!({ "mse": m, "psnr": metric(psnr_from_mse(m)), "ssim": metric(s) }));
    Ok(ExitCode::SUCCESS)
}
