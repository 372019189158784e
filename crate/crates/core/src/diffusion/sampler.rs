//! Deterministic (η = 0) DDIM sampling with classifier-free guidance.

use serde::{Deserialize, Serialize};

use super::algebra::{cfg_combine, q_sample, split_prediction, v_target, Prediction};
use super::latent::LatentTensor;
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};

pub const DEFAULT_STEPS: usize = 30;
pub const DEFAULT_CFG_SCALE: f64 = 3.5;

/// A network mapping a noisy latent at step `t` to a prediction of the same shape.
/// `condition = None` is the null token used for the unconditional branch.
pub trait Denoiser {
    fn predict(&self, x_t: &LatentTensor, t: usize, condition: Option<&[f32]>) -> Result<LatentTensor>;

    fn prediction(&self) -> Prediction {
        Prediction::V
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn predict(&self, x_t: &LatentTensor, t: usize, condition: Option<&[f32]>) -> Result<LatentTensor> {
        (**self).predict(x_t, t, condition)
    }

    fn prediction(&self) -> Prediction {
        (**self).prediction()
    }
}

fn checked_predict(
    denoiser: &dyn Denoiser,
    x_t: &LatentTensor,
    t: usize,
    condition: Option<&[f32]>,
) -> Result<LatentTensor> {
    let out = denoiser.predict(x_t, t, condition)?;
    if out.shape() != x_t.shape() {
        return Err(Error::Dimension(format!(
            "denoiser returned {:?} for input {:?}",
            out.shape(),
            x_t.shape()
        )));
    }
    Ok(out)
}

/// Mean squared error between the denoiser output and its training target
/// (`v_target` for v-prediction, `ε` for ε-prediction).
pub fn v_loss(
    denoiser: &dyn Denoiser,
    x0: &LatentTensor,
    t: usize,
    eps: &LatentTensor,
    condition: Option<&[f32]>,
    sched: &NoiseSchedule,
) -> Result<f64> {
    let x_t = q_sample(x0, t, eps, sched)?;
    let out = checked_predict(denoiser, &x_t, t, condition)?;
    let target = match denoiser.prediction() {
        Prediction::V => v_target(x0, eps, t, sched)?,
        Prediction::Epsilon => eps.clone(),
    };
    let sum: f64 = out
        .data()
        .iter()
        .zip(target.data())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    Ok(sum / out.len().max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub steps: usize,
    pub cfg_scale: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            cfg_scale: DEFAULT_CFG_SCALE,
            seed: 0,
        }
    }
}

/// One sampler update, for audit logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub index: usize,
    pub t: usize,
    /// Step the update moves to; 0 is the clean endpoint.
    pub t_next: usize,
    pub x_norm: f64,
    pub prediction_norm: f64,
}

/// Evenly spaced descending steps from `T` to 1.
pub fn timesteps(total: usize, steps: usize) -> Result<Vec<usize>> {
    if steps == 0 || steps > total {
        return Err(Error::Domain(format!("sampling steps {steps} outside 1..={total}")));
    }
    if steps == 1 {
        return Ok(vec![total]);
    }
    Ok((0..steps)
        .map(|i| total - ((i * (total - 1)) as f64 / (steps - 1) as f64).round() as usize)
        .collect())
}

pub fn sample(
    denoiser: &dyn Denoiser,
    condition: Option<&[f32]>,
    shape: (usize, usize, usize),
    config: &SamplerConfig,
    sched: &NoiseSchedule,
) -> Result<LatentTensor> {
    sample_with_trace(denoiser, condition, shape, config, sched, &mut |_| {})
}

/// Starts from seeded unit noise and applies
/// `x_{t′} = √ᾱ_{t′} x̂₀ + √(1−ᾱ_{t′}) ε̂` along [`timesteps`], ending at `ᾱ = 1`.
/// With `cfg_scale ≠ 1` each step queries the denoiser with and without the condition.
pub fn sample_with_trace(
    denoiser: &dyn Denoiser,
    condition: Option<&[f32]>,
    shape: (usize, usize, usize),
    config: &SamplerConfig,
    sched: &NoiseSchedule,
    trace: &mut dyn FnMut(&StepRecord),
) -> Result<LatentTensor> {
    if !config.cfg_scale.is_finite() {
        return Err(Error::Domain("cfg scale must be finite".into()));
    }
    let ts = timesteps(sched.steps(), config.steps)?;
    let (h, w, c) = shape;
    let mut x = LatentTensor::randn(h, w, c, config.seed);
    for (index, &t) in ts.iter().enumerate() {
        let cond = checked_predict(denoiser, &x, t, condition)?;
        let out = if config.cfg_scale == 1.0 {
            cond
        } else {
            let uncond = checked_predict(denoiser, &x, t, None)?;
            cfg_combine(&uncond, &cond, config.cfg_scale)?
        };
        let (x0, eps) = split_prediction(denoiser.prediction(), &x, &out, t, sched)?;
        let t_next = ts.get(index + 1).copied().unwrap_or(0);
        let ab = sched.alpha_bar(t_next)?;
        let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
        x = x0.zip_with(&eps, |x0, e| a * x0 + s * e)?;
        if x.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sampler state at step {t}")));
        }
        trace(&StepRecord {
            index,
            t,
            t_next,
            x_norm: x.norm(),
            prediction_norm: out.norm(),
        });
    }
    Ok(x)
}

/// The exact v-predictor when all data is the single latent `target`.
#[derive(Debug, Clone)]
pub struct PointMassDenoiser {
    pub target: LatentTensor,
    pub schedule: NoiseSchedule,
}

impl Denoiser for PointMassDenoiser {
    fn predict(&self, x_t: &LatentTensor, t: usize, _condition: Option<&[f32]>) -> Result<LatentTensor> {
        let ab = self.schedule.noisy_alpha_bar(t)?;
        let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
        // ε̂ = (x_t − √ᾱ x*) / √(1−ᾱ), v = √ᾱ ε̂ − √(1−ᾱ) x*
        x_t.zip_with(&self.target, |x, x0| a * (x - a * x0) / s - s * x0)
    }
}

/// The exact v-predictor for i.i.d. `N(mean, std²)` data in every entry.
#[derive(Debug, Clone)]
pub struct GaussianDenoiser {
    pub mean: f64,
    pub std: f64,
    pub schedule: NoiseSchedule,
}

impl Denoiser for GaussianDenoiser {
    fn predict(&self, x_t: &LatentTensor, t: usize, _condition: Option<&[f32]>) -> Result<LatentTensor> {
        let ab = self.schedule.noisy_alpha_bar(t)?;
        let (a, s) = (ab.sqrt(), (1.0 - ab).sqrt());
        let var = self.std * self.std;
        let denom = ab * var + 1.0 - ab;
        Ok(x_t.map(|x| {
            let r = x - a * self.mean;
            let x0 = self.mean + a * var / denom * r;
            let eps = s / denom * r;
            a * eps - s * x0
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::schedule::{make_schedule, ScheduleKind};

    #[test]
    fn timesteps_span_t_to_one() {
        assert_eq!(timesteps(1000, 30).unwrap().first(), Some(&1000));
        assert_eq!(timesteps(1000, 30).unwrap().last(), Some(&1));
        assert_eq!(timesteps(10, 10).unwrap(), (1..=10).rev().collect::<Vec<_>>());
        assert_eq!(timesteps(10, 1).unwrap(), vec![10]);
        assert!(timesteps(10, 11).is_err());
        assert!(timesteps(10, 0).is_err());
        let ts = timesteps(1000, 30).unwrap();
        assert!(ts.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn point_mass_is_recovered() {
        let sched = make_schedule(1000, ScheduleKind::Linear).unwrap();
        let target = LatentTensor::randn(4, 4, 3, 42);
        let d = PointMassDenoiser { target: target.clone(), schedule: sched.clone() };
        let out = sample(&d, Some(&[1.0]), target.shape(), &SamplerConfig::default(), &sched).unwrap();
        for (a, b) in out.data().iter().zip(target.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn oracle_denoiser_has_zero_loss() {
        let sched = make_schedule(1000, ScheduleKind::Linear).unwrap();
        let x0 = LatentTensor::randn(3, 3, 2, 1);
        let eps = LatentTensor::randn(3, 3, 2, 2);
        let d = PointMassDenoiser { target: x0.clone(), schedule: sched.clone() };
        assert!(v_loss(&d, &x0, 500, &eps, None, &sched).unwrap() < 1e-10);
    }

    struct Zero;
    impl Denoiser for Zero {
        fn predict(&self, x_t: &LatentTensor, _t: usize, _c: Option<&[f32]>) -> Result<LatentTensor> {
            let (h, w, c) = x_t.shape();
            Ok(LatentTensor::zeros(h, w, c))
        }
    }

    struct WrongShape;
    impl Denoiser for WrongShape {
        fn predict(&self, _x: &LatentTensor, _t: usize, _c: Option<&[f32]>) -> Result<LatentTensor> {
            Ok(LatentTensor::zeros(1, 1, 1))
        }
    }

    #[test]
    fn zero_denoiser_loss_is_mean_square_target() {
        let sched = make_schedule(100, ScheduleKind::Cosine).unwrap();
        let x0 = LatentTensor::randn(3, 3, 2, 3);
        let eps = LatentTensor::randn(3, 3, 2, 4);
        let v = v_target(&x0, &eps, 50, &sched).unwrap();
        let want = v.data().iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / v.len() as f64;
        let got = v_loss(&Zero, &x0, 50, &eps, None, &sched).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!(got >= 0.0);
    }

    #[test]
    fn shape_violation_aborts() {
        let sched = make_schedule(100, ScheduleKind::Linear).unwrap();
        let err = sample(&WrongShape, None, (2, 2, 2), &SamplerConfig::default(), &sched);
        assert!(matches!(err, Err(Error::Dimension(_))));
    }
}
