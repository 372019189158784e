//! AdamW with decoupled weight decay and bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.95,
            weight_decay: 0.05,
            eps: 1e-8,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.weight_decay >= 0.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("optimizer config", format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient entry was non-finite; parameters and state are untouched.
    Rejected,
}

/// One AdamW update with a uniform learning rate.
pub fn adamw_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &AdamWConfig) -> Result<StepOutcome> {
    adamw_step_scaled(params, grads, state, config, |_| 1.0)
}

/// One AdamW update where parameter `i` uses `learning_rate · lr_scale(i)`.
pub fn adamw_step_scaled(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    config: &AdamWConfig,
    lr_scale: impl Fn(usize) -> f64,
) -> Result<StepOutcome> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Dimension(format!(
            "{n} params, {} grads, {}/{} moments",
            grads.len(),
            state.m.len(),
            state.v.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Ok(StepOutcome::Rejected);
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);
    for i in 0..n {
        let lr = config.learning_rate * lr_scale(i);
        let g = grads[i];
        params[i] *= 1.0 - lr * config.weight_decay;
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + config.eps);
    }
    Ok(StepOutcome::Applied)
}
