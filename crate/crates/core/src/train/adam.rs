//! Bias-corrected Adam.

use crate::error::{Error, Result};

/// Optimizer moments, sized like the parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One descent step along `grad`:
/// `m ← β₁m + (1-β₁)g`, `v ← β₂v + (1-β₂)g²`, bias-corrected, then
/// `θ ← θ - lr·m̂/(√v̂ + ε)`.
pub fn adam_step(
    theta: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    if theta.len() != grad.len() || theta.len() != state.m.len() {
        return Err(Error::Usage(format!(
            "adam shapes disagree: theta {}, grad {}, state {}",
            theta.len(),
            grad.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let m_corr = 1.0 - beta1.powi(t);
    let v_corr = 1.0 - beta2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let m_hat = state.m[i] / m_corr;
        let v_hat = state.v[i] / v_corr;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        if !theta[i].is_finite() {
            return Err(Error::Numeric(format!(
                "adam produced a non-finite parameter at index {i} on step {}",
                state.step
            )));
        }
    }
    Ok(())
}
