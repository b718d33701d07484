use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Moment estimates for every parameter in a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
    /// Learning rate used by the most recent step.
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamSet, config: AdamConfig) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.value().rows(), p.value().cols())).collect();
        Self { m: zeros.clone(), v: zeros, t: 0, lr: 0.0, beta1: config.beta1, beta2: config.beta2, eps: config.eps }
    }
}

/// One bias-corrected Adam update using the gradients loaded in `params`.
pub fn adam_step(state: &mut AdamState, params: &mut ParamSet, lr: f64) -> Result<()> {
    if state.m.len() != params.len() {
        return Err(Error::InvalidArgument(format!(
            "optimizer state tracks {} parameters, set has {}",
            state.m.len(),
            params.len()
        )));
    }
    for i in 0..params.len() {
        let p = params.get(i);
        if !p.grad().is_finite() {
            return Err(Error::Diverged(format!("non-finite gradient for parameter '{}' at step {}", p.name, state.t + 1)));
        }
    }
    state.t += 1;
    state.lr = lr;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = params.get(i).grad();
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        let value = params.get_mut(i).value_mut();
        for (((w, gi), mi), vi) in
            value.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m.as_mut_slice()).zip(v.as_mut_slice())
        {
            *mi = state.beta1 * *mi + (1.0 - state.beta1) * gi;
            *vi = state.beta2 * *vi + (1.0 - state.beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        if !value.is_finite() {
            let name = params.get(i).name.clone();
            return Err(Error::Diverged(format!("parameter '{name}' became non-finite at step {}", state.t)));
        }
    }
    Ok(())
}
