//! Multi-view fitting of a UV attribute map against target renders.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use super::adamw::{adamw_step_scaled, AdamState, AdamWConfig, StepOutcome};
use super::losses::{loss_l1, loss_ssim, psnr_from_mse, ssim};
use crate::body::SkinnedTemplate;
use crate::error::{Error, Result};
use crate::gsplat::{channel, DecodeBasis, UvAttributeMap, RAW_CHANNELS};
use crate::render::{render, render_backward, Camera, ImageBuffer, ImageF64, DEFAULT_BACKGROUND};

/// Learning-rate multipliers per raw channel group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrMultipliers {
    pub position: f64,
    pub scale: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub color: f64,
}

impl Default for LrMultipliers {
    fn default() -> Self {
        Self {
            position: 0.02,
            scale: 0.5,
            rotation: 0.2,
            opacity: 2.0,
            color: 2.0,
        }
    }
}

impl LrMultipliers {
    fn for_channel(&self, c: usize) -> f64 {
        match c {
            c if c < channel::SCALE => self.position,
            c if c < channel::ROTATION => self.scale,
            c if c < channel::OPACITY => self.rotation,
            c if c < channel::COLOR => self.opacity,
            _ => self.color,
        }
    }

    fn is_valid(&self) -> bool {
        [self.position, self.scale, self.rotation, self.opacity, self.color]
            .iter()
            .all(|m| *m >= 0.0 && m.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub lambda_ssim: f64,
    /// Weight of the KL term when latent statistics are fitted; image-only fits ignore it.
    pub lambda_kl: f64,
    /// Target indices used for supervision; empty means every non-eval view.
    pub input_views: Vec<usize>,
    pub eval_views: Vec<usize>,
    pub views_per_iteration: usize,
    pub seed: u64,
    pub uv_width: usize,
    pub uv_height: usize,
    pub lr_multipliers: LrMultipliers,
    pub max_grad_norm: Option<f64>,
    pub background: [f64; 3],
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.95,
            weight_decay: 0.05,
            eps: 1e-8,
            lambda_ssim: 0.2,
            lambda_kl: 1e-6,
            input_views: Vec::new(),
            eval_views: Vec::new(),
            views_per_iteration: 2,
            seed: 0,
            uv_width: 512,
            uv_height: 512,
            lr_multipliers: LrMultipliers::default(),
            max_grad_norm: None,
            background: DEFAULT_BACKGROUND,
        }
    }
}

impl FitConfig {
    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            weight_decay: self.weight_decay,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer().validate()?;
        if !(self.lambda_ssim >= 0.0 && self.lambda_kl >= 0.0) {
            return Err(Error::invalid("fit config", "loss weights must be non-negative"));
        }
        if self.views_per_iteration == 0 {
            return Err(Error::invalid("fit config", "views_per_iteration must be positive"));
        }
        if !self.lr_multipliers.is_valid() {
            return Err(Error::invalid("fit config", "learning-rate multipliers must be finite and non-negative"));
        }
        if matches!(self.max_grad_norm, Some(n) if !(n > 0.0)) {
            return Err(Error::invalid("fit config", "max_grad_norm must be positive"));
        }
        Ok(())
    }
}

fn serialize_metric<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else if *v < 0.0 {
        s.serialize_str("-inf")
    } else {
        s.serialize_str("nan")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    #[serde(serialize_with = "serialize_metric")]
    pub loss: f64,
    #[serde(serialize_with = "serialize_metric")]
    pub psnr: f64,
    pub views: Vec<usize>,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub view: usize,
    #[serde(serialize_with = "serialize_metric")]
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    /// Objective before each update, one entry per iteration.
    pub loss_curve: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub eval: Vec<EvalMetrics>,
    #[serde(serialize_with = "serialize_metric")]
    pub mean_eval_psnr: f64,
    pub gaussian_count: usize,
    pub rejected_steps: usize,
    /// SSIM stands in for the perceptual and adversarial terms.
    pub objective: String,
    /// Seconds; left out of the JSON so reruns serialize identically.
    #[serde(skip)]
    pub wall_time: f64,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Value of the image objective for one view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub total: f64,
    pub l1: f64,
    pub ssim_loss: f64,
    pub mse: f64,
}

/// Renders the decoded map from `camera` (f64 RGBA).
pub fn render_raw(basis: &DecodeBasis, raw: &[f64], camera: &Camera, background: [f64; 3]) -> Result<ImageF64> {
    let posed = basis.decode(raw)?.to_posed();
    Ok(render(&posed, camera, background).1.image)
}

/// `L1 + λ_ssim (1 − SSIM)` for one view and its gradient with respect to the raw channels.
pub fn view_objective(
    basis: &DecodeBasis,
    raw: &[f64],
    camera: &Camera,
    target: &ImageF64,
    lambda_ssim: f64,
    background: [f64; 3],
) -> Result<(ObjectiveValue, Vec<f64>)> {
    let canonical = basis.decode(raw)?;
    let posed = canonical.to_posed();
    let (frame, out) = render(&posed, camera, background);
    let l1 = loss_l1(&out.image, target)?;
    let mut upstream = l1.grad;
    let mut ssim_loss = 0.0;
    if lambda_ssim > 0.0 {
        let s = loss_ssim(&out.image, target)?;
        ssim_loss = s.value;
        for (u, g) in upstream.data_mut().iter_mut().zip(s.grad.data()) {
            *u += lambda_ssim * g;
        }
    }
    let mse = super::losses::mse(&out.image, target)?;
    let grads = render_backward(&posed, camera, &frame, &out.state, &upstream)?;
    let raw_grad = basis.backward(raw, &grads)?;
    Ok((
        ObjectiveValue {
            total: l1.value + lambda_ssim * ssim_loss,
            l1: l1.value,
            ssim_loss,
            mse,
        },
        raw_grad,
    ))
}

fn resolve_views(config: &FitConfig, count: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    for &v in config.input_views.iter().chain(&config.eval_views) {
        if v >= count {
            return Err(Error::Index(format!("view {v} >= {count} targets")));
        }
    }
    let mut input = config.input_views.clone();
    if input.is_empty() {
        input = (0..count).filter(|v| !config.eval_views.contains(v)).collect();
    }
    if input.is_empty() {
        input = (0..count).collect();
    }
    Ok((input, config.eval_views.clone()))
}

/// Fits a zero-initialized map at the configured resolution.
pub fn fit_subject(
    template: &SkinnedTemplate,
    targets: &[(Camera, ImageBuffer)],
    config: &FitConfig,
) -> Result<(UvAttributeMap, FitReport)> {
    let map = UvAttributeMap::from_template(template, config.uv_width, config.uv_height)?;
    fit_map(template, map, targets, config, &mut |_| {})
}

/// Fits starting from `init`, calling `progress` after every iteration.
///
/// A non-finite objective aborts with [`Error::Diverged`] carrying the partial report.
pub fn fit_map(
    template: &SkinnedTemplate,
    init: UvAttributeMap,
    targets: &[(Camera, ImageBuffer)],
    config: &FitConfig,
    progress: &mut dyn FnMut(&IterationRecord),
) -> Result<(UvAttributeMap, FitReport)> {
    config.validate()?;
    if targets.is_empty() {
        return Err(Error::invalid("fit targets", "at least one view is required"));
    }
    for (cam, img) in targets {
        cam.validate()?;
        if img.width() != cam.width as usize || img.height() != cam.height as usize || img.channels() < 3 {
            return Err(Error::Dimension(format!(
                "target {}×{}×{} for a {}×{} camera",
                img.width(),
                img.height(),
                img.channels(),
                cam.width,
                cam.height
            )));
        }
    }
    let start = Instant::now();
    let (input, eval) = resolve_views(config, targets.len())?;
    let target_rgb: Vec<ImageF64> = targets.iter().map(|(_, img)| img.rgb_f64()).collect();

    let mut map = init;
    let basis = DecodeBasis::new(&map, template)?;
    let mut raw = map.gather_valid();
    let mut state = AdamState::new(raw.len());
    let optimizer = config.optimizer();
    let lr_by_channel: Vec<f64> = (0..RAW_CHANNELS).map(|c| config.lr_multipliers.for_channel(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let per_iter = config.views_per_iteration.min(input.len());

    let mut report = FitReport {
        loss_curve: Vec::with_capacity(config.iterations),
        iterations: Vec::with_capacity(config.iterations),
        eval: Vec::new(),
        mean_eval_psnr: f64::NAN,
        gaussian_count: basis.len(),
        rejected_steps: 0,
        objective: format!("l1 + {} * (1 - ssim); ssim replaces the perceptual and adversarial terms", config.lambda_ssim),
        wall_time: 0.0,
    };

    for iteration in 0..config.iterations {
        let mut views: Vec<usize> = rand::seq::index::sample(&mut rng, input.len(), per_iter)
            .into_iter()
            .map(|k| input[k])
            .collect();
        views.sort_unstable();

        let mut loss = 0.0;
        let mut mse = 0.0;
        let mut grad = vec![0.0; raw.len()];
        let weight = 1.0 / views.len() as f64;
        for &v in &views {
            let (value, g) = view_objective(&basis, &raw, &targets[v].0, &target_rgb[v], config.lambda_ssim, config.background)?;
            loss += weight * value.total;
            mse += weight * value.mse;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += weight * b;
            }
        }
        let psnr = psnr_from_mse(mse);
        report.loss_curve.push(loss);
        if !loss.is_finite() {
            let record = IterationRecord { iteration, loss, psnr, views, rejected: true };
            progress(&record);
            report.iterations.push(record);
            report.wall_time = start.elapsed().as_secs_f64();
            map.scatter_valid(&raw)?;
            return Err(Error::Diverged {
                iteration,
                report: Box::new(report),
            });
        }
        if let Some(max_norm) = config.max_grad_norm {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > max_norm {
                let s = max_norm / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
        }
        let outcome = adamw_step_scaled(&mut raw, &grad, &mut state, &optimizer, |i| lr_by_channel[i % RAW_CHANNELS])?;
        let rejected = outcome == StepOutcome::Rejected;
        if rejected {
            report.rejected_steps += 1;
            log::warn!("iteration {iteration}: non-finite gradient, step rejected");
        }
        let record = IterationRecord { iteration, loss, psnr, views, rejected };
        progress(&record);
        report.iterations.push(record);
    }

    map.scatter_valid(&raw)?;
    for &v in &eval {
        let pred = render_raw(&basis, &raw, &targets[v].0, config.background)?;
        report.eval.push(EvalMetrics {
            view: v,
            psnr: psnr_from_mse(super::losses::mse(&pred, &target_rgb[v])?),
            ssim: ssim(&pred, &target_rgb[v])?,
        });
    }
    if !report.eval.is_empty() {
        report.mean_eval_psnr = report.eval.iter().map(|e| e.psnr).sum::<f64>() / report.eval.len() as f64;
    }
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((map, report))
}
