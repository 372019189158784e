use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LINEAR_BETA_START: f64 = 1e-4;
pub const LINEAR_BETA_END: f64 = 0.02;
pub const COSINE_OFFSET: f64 = 0.008;
pub const MAX_BETA: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::invalid("schedule kind", format!("{other:?} (expected linear or cosine)"))),
        }
    }
}

/// `β_t` and `ᾱ_t = Π_{s≤t} (1 − β_s)` for `t = 1..=T`, stored at index `t − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    pub betas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `ᾱ_t` for `1 ≤ t ≤ T`; `ᾱ_0 = 1` is accepted as the clean endpoint.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        match t {
            0 => Ok(1.0),
            t if t <= self.steps() => Ok(self.alpha_bars[t - 1]),
            t => Err(Error::Domain(format!("timestep {t} outside 1..={}", self.steps()))),
        }
    }

    /// As [`Self::alpha_bar`] but rejects `t = 0`.
    pub fn noisy_alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::Domain(format!("timestep 0 outside 1..={}", self.steps())));
        }
        self.alpha_bar(t)
    }
}

pub fn make_schedule(steps: usize, kind: ScheduleKind) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::Domain("schedule needs at least one step".into()));
    }
    let betas: Vec<f64> = match kind {
        ScheduleKind::Linear => (0..steps)
            .map(|i| {
                if steps == 1 {
                    LINEAR_BETA_START
                } else {
                    LINEAR_BETA_START + (LINEAR_BETA_END - LINEAR_BETA_START) * i as f64 / (steps - 1) as f64
                }
            })
            .collect(),
        ScheduleKind::Cosine => {
            let f = |t: f64| (((t / steps as f64) + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * FRAC_PI_2).cos().powi(2);
            (1..=steps)
                .map(|t| (1.0 - f(t as f64) / f((t - 1) as f64)).min(MAX_BETA))
                .collect()
        }
    };
    let mut alpha_bars = Vec::with_capacity(steps);
    let mut acc = 1.0;
    for b in &betas {
        acc *= 1.0 - b;
        alpha_bars.push(acc);
    }
    Ok(NoiseSchedule { kind, betas, alpha_bars })
}
