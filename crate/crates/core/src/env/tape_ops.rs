//! Tape-recorded environment dynamics for a chunk of batch samples.
//!
//! Each quantity is a 1×n row over the chunk. The action row produced by the
//! policy becomes the next last-weight row, which is how gradients flow
//! through time.

use crate::autodiff::{Tape, Var};
use crate::error::Result;

use super::{EnvSpec, State, StaticParam};

/// Rows describing the environment state of a chunk of samples.
pub struct EnvRows<'t> {
    pub alpha: Vec<Var<'t>>,
    pub lw: Var<'t>,
    pub statics: Vec<Var<'t>>,
}

/// Record leaves for the initial states of a chunk.
pub fn initial_rows<'t>(tape: &'t Tape, env: &EnvSpec, states: &[State]) -> Result<EnvRows<'t>> {
    let comps = env.alpha.components();
    let mut alpha = Vec::with_capacity(comps);
    for c in 0..comps {
        let row: Vec<f64> = states.iter().map(|s| s.alpha[c]).collect();
        alpha.push(tape.row(&row)?);
    }
    let lw_row: Vec<f64> = states.iter().map(|s| s.last_weight).collect();
    let lw = tape.row(&lw_row)?;
    let mut statics = Vec::with_capacity(env.statics.len());
    for i in 0..env.statics.len() {
        let row: Vec<f64> = states.iter().map(|s| s.statics[i]).collect();
        statics.push(tape.row(&row)?);
    }
    Ok(EnvRows { alpha, lw, statics })
}

impl<'t> EnvRows<'t> {
    /// Feature rows in network input order (alphas, last weight, statics).
    pub fn feature_rows(&self) -> Vec<Var<'t>> {
        let mut rows = self.alpha.clone();
        rows.push(self.lw);
        rows.extend(self.statics.iter().copied());
        rows
    }
}

fn static_row<'t>(env: &EnvSpec, rows: &EnvRows<'t>, name: StaticParam) -> Option<Var<'t>> {
    env.statics.iter().position(|d| d.name == name).map(|i| rows.statics[i])
}

/// Per-sample reward `w·alpha_total - risk(w) - cost(w, lw)` as a 1×n row.
pub fn reward_row<'t>(
    tape: &'t Tape,
    env: &EnvSpec,
    rows: &EnvRows<'t>,
    action: Var<'t>,
) -> Result<Var<'t>> {
    let mut alpha_total = rows.alpha[0];
    for comp in &rows.alpha[1..] {
        alpha_total = tape.add(alpha_total, *comp)?;
    }
    let mut reward = tape.mul(action, alpha_total)?;

    if env.risk.l2_lambda > 0.0 {
        let quad = tape.scale(tape.square(action)?, 0.5 * env.risk.l2_lambda)?;
        reward = tape.sub(reward, quad)?;
    }
    if let Some(mw) = &env.risk.max_weight {
        let excess = tape.relu(tape.add_const(tape.abs(action)?, -mw.m)?)?;
        reward = tape.sub(reward, tape.scale(excess, mw.k)?)?;
    }

    let trade = tape.sub(action, rows.lw)?;
    match static_row(env, rows, StaticParam::L1Spread) {
        Some(spread) => {
            let l1 = tape.mul(spread, tape.abs(trade)?)?;
            reward = tape.sub(reward, l1)?;
        }
        None if env.cost.l1_spread > 0.0 => {
            let l1 = tape.scale(tape.abs(trade)?, env.cost.l1_spread)?;
            reward = tape.sub(reward, l1)?;
        }
        None => {}
    }
    if env.cost.l2_coeff > 0.0 {
        let l2 = tape.scale(tape.square(trade)?, env.cost.l2_coeff)?;
        reward = tape.sub(reward, l2)?;
    }
    Ok(reward)
}

/// Advance the chunk one step: AR(1) alphas with the provided innovation
/// rows, action becomes the last weight, statics carry over.
pub fn transition_rows<'t>(
    tape: &'t Tape,
    env: &EnvSpec,
    rows: &EnvRows<'t>,
    action: Var<'t>,
    noise_rows: &[Var<'t>],
) -> Result<EnvRows<'t>> {
    let params = env.alpha.component_params();
    let mut alpha = Vec::with_capacity(params.len());
    for (c, &(rho, sigma)) in params.iter().enumerate() {
        let decayed = tape.scale(rows.alpha[c], rho)?;
        let sigma_static =
            if c == 0 { static_row(env, rows, StaticParam::Sigma) } else { None };
        let shock = match sigma_static {
            Some(sigma_row) => tape.mul(sigma_row, noise_rows[c])?,
            None => tape.scale(noise_rows[c], sigma)?,
        };
        alpha.push(tape.add(decayed, shock)?);
    }
    Ok(EnvRows { alpha, lw: action, statics: rows.statics.clone() })
}
