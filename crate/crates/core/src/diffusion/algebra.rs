//! Forward diffusion and the v / ε parameterizations.

use serde::{Deserialize, Serialize};

use super::latent::LatentTensor;
use super::schedule::NoiseSchedule;
use crate::error::Result;

/// What a denoiser outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prediction {
    /// `v = √ᾱ ε − √(1−ᾱ) x₀`
    #[default]
    V,
    Epsilon,
}

fn coefficients(t: usize, sched: &NoiseSchedule) -> Result<(f64, f64)> {
    let ab = sched.noisy_alpha_bar(t)?;
    Ok((ab.sqrt(), (1.0 - ab).sqrt()))
}

/// `√ᾱ_t x₀ + √(1−ᾱ_t) ε`.
pub fn q_sample(x0: &LatentTensor, t: usize, eps: &LatentTensor, sched: &NoiseSchedule) -> Result<LatentTensor> {
    let (a, s) = coefficients(t, sched)?;
    x0.zip_with(eps, |x, e| a * x + s * e)
}

/// `√ᾱ_t ε − √(1−ᾱ_t) x₀`.
pub fn v_target(x0: &LatentTensor, eps: &LatentTensor, t: usize, sched: &NoiseSchedule) -> Result<LatentTensor> {
    let (a, s) = coefficients(t, sched)?;
    x0.zip_with(eps, |x, e| a * e - s * x)
}

/// `(x̂₀, ε̂) = (√ᾱ x_t − √(1−ᾱ) v, √(1−ᾱ) x_t + √ᾱ v)`.
pub fn from_v(x_t: &LatentTensor, v: &LatentTensor, t: usize, sched: &NoiseSchedule) -> Result<(LatentTensor, LatentTensor)> {
    let (a, s) = coefficients(t, sched)?;
    Ok((x_t.zip_with(v, |x, v| a * x - s * v)?, x_t.zip_with(v, |x, v| s * x + a * v)?))
}

/// `(x̂₀, ε̂) = ((x_t − √(1−ᾱ) ε) / √ᾱ, ε)`.
pub fn from_eps(x_t: &LatentTensor, eps: &LatentTensor, t: usize, sched: &NoiseSchedule) -> Result<(LatentTensor, LatentTensor)> {
    let (a, s) = coefficients(t, sched)?;
    Ok((x_t.zip_with(eps, |x, e| (x - s * e) / a)?, eps.clone()))
}

/// Converts a denoiser output of either kind to `(x̂₀, ε̂)`.
pub fn split_prediction(
    kind: Prediction,
    x_t: &LatentTensor,
    out: &LatentTensor,
    t: usize,
    sched: &NoiseSchedule,
) -> Result<(LatentTensor, LatentTensor)> {
    match kind {
        Prediction::V => from_v(x_t, out, t, sched),
        Prediction::Epsilon => from_eps(x_t, out, t, sched),
    }
}

/// `uncond + scale · (cond − uncond)`.
pub fn cfg_combine(uncond: &LatentTensor, cond: &LatentTensor, scale: f64) -> Result<LatentTensor> {
    uncond.zip_with(cond, |u, c| u + scale * (c - u))
}
