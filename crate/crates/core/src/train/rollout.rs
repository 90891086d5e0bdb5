//! Unrolled cumulative-reward graphs.
//!
//! A rollout threads the policy action through the next state's last weight,
//! so one backward pass yields the gradient of the whole `T`-step cumulative
//! reward with respect to every network parameter.
//!
//! The batch is split into fixed-size chunks; each chunk builds its own tape
//! and the per-chunk gradients are reduced in chunk order. The result is
//! bit-identical for any worker count.

use rayon::prelude::*;

use crate::autodiff::Tape;
use crate::env::{initial_rows, reward_row, transition_rows, EnvSpec, NoiseTensor, State};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;

/// Samples per tape. Large enough that the hidden-layer products run at
/// matrix speed, small enough to keep per-worker arenas modest.
pub const ROLLOUT_CHUNK: usize = 128;

fn validate_rollout(
    params: &PolicyParams,
    states: &[State],
    noise: &NoiseTensor,
    horizon: usize,
    env: &EnvSpec,
) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Usage("rollout horizon must be at least 1".into()));
    }
    if states.is_empty() {
        return Err(Error::Usage("rollout needs at least one initial state".into()));
    }
    if noise.n != states.len() || noise.t < horizon || noise.comps != env.alpha.components() {
        return Err(Error::Usage(format!(
            "noise tensor {}x{}x{} does not cover {} samples over horizon {}",
            noise.n,
            noise.t,
            noise.comps,
            states.len(),
            horizon
        )));
    }
    if params.arch().input_dim != env.feature_count() {
        return Err(Error::Usage(format!(
            "policy expects {} inputs but the environment has {} features",
            params.arch().input_dim,
            env.feature_count()
        )));
    }
    Ok(())
}

/// Mean cumulative reward of the batch and its gradient with respect to the
/// flat parameter vector.
pub fn rollout_cr(
    params: &PolicyParams,
    states: &[State],
    noise: &NoiseTensor,
    horizon: usize,
    env: &EnvSpec,
) -> Result<(f64, Vec<f64>)> {
    validate_rollout(params, states, noise, horizon, env)?;
    let n = states.len();
    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(ROLLOUT_CHUNK)
        .map(|start| start..(start + ROLLOUT_CHUNK).min(n))
        .collect();

    let partials: Vec<Result<(f64, Vec<f64>)>> = ranges
        .par_iter()
        .map(|range| chunk_sum_and_grad(params, states, noise, horizon, env, range.clone()))
        .collect();

    // Fixed-order reduction over chunks keeps the result independent of
    // scheduling.
    let mut total = 0.0;
    let mut grad = vec![0.0; params.theta().len()];
    for partial in partials {
        let (cr_sum, g) = partial?;
        total += cr_sum;
        for (acc, gi) in grad.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    let scale = 1.0 / n as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok((total * scale, grad))
}

/// Sum of cumulative rewards over one chunk, plus the gradient of that sum.
fn chunk_sum_and_grad(
    params: &PolicyParams,
    states: &[State],
    noise: &NoiseTensor,
    horizon: usize,
    env: &EnvSpec,
    range: std::ops::Range<usize>,
) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::new();
    let leaves = params.leaves(&tape)?;
    let mut rows = initial_rows(&tape, env, &states[range.clone()])?;
    let comps = env.alpha.components();

    let mut acc = None;
    for step in 0..horizon {
        let features = tape.stack_rows(&rows.feature_rows())?;
        let action = params.forward_tape(&tape, &leaves, features)?;
        let r = reward_row(&tape, env, &rows, action)?;
        acc = Some(match acc {
            None => r,
            Some(prev) => tape.add(prev, r)?,
        });
        if step + 1 < horizon {
            let mut noise_rows = Vec::with_capacity(comps);
            for c in 0..comps {
                noise_rows.push(tape.row(noise.row(step, c, range.clone()))?);
            }
            rows = transition_rows(&tape, env, &rows, action, &noise_rows)?;
        }
    }
    let cr = acc.expect("horizon >= 1");
    if let Some(bad) = cr.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite cumulative reward for sample {}",
            range.start + bad
        )));
    }
    let total = tape.sum(cr)?;
    let grads = tape.backward(total)?;
    let grad = leaves.grad_theta(&grads);
    if let Some(bad) = grad.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient at parameter {bad} (chunk starting at sample {})",
            range.start
        )));
    }
    Ok((total.value(), grad))
}

/// Tape size and recorded work for a single-chunk rollout graph. Used to
/// check that graph growth is linear in the horizon and parameter count.
pub fn rollout_tape_stats(
    params: &PolicyParams,
    states: &[State],
    noise: &NoiseTensor,
    horizon: usize,
    env: &EnvSpec,
) -> Result<(usize, u64)> {
    validate_rollout(params, states, noise, horizon, env)?;
    let tape = Tape::new();
    let leaves = params.leaves(&tape)?;
    let mut rows = initial_rows(&tape, env, states)?;
    let comps = env.alpha.components();
    let mut acc = None;
    for step in 0..horizon {
        let features = tape.stack_rows(&rows.feature_rows())?;
        let action = params.forward_tape(&tape, &leaves, features)?;
        let r = reward_row(&tape, env, &rows, action)?;
        acc = Some(match acc {
            None => r,
            Some(prev) => tape.add(prev, r)?,
        });
        if step + 1 < horizon {
            let mut noise_rows = Vec::with_capacity(comps);
            for c in 0..comps {
                noise_rows.push(tape.row(noise.row(step, c, 0..states.len()))?);
            }
            rows = transition_rows(&tape, env, &rows, action, &noise_rows)?;
        }
    }
    let _ = tape.sum(acc.expect("horizon >= 1"))?;
    Ok((tape.node_count(), tape.flops()))
}

/// Smallest distance from a kink encountered while rolling the policy
/// forward: ReLU pre-activations, the trade `|w - lw|` when a proportional
/// cost is active, and `||w| - m|` under a max-weight penalty.
///
/// Finite-difference comparisons are only meaningful when this margin is
/// comfortably larger than the probe step.
pub fn rollout_kink_margin(
    params: &PolicyParams,
    states: &[State],
    noise: &NoiseTensor,
    horizon: usize,
    env: &EnvSpec,
) -> Result<f64> {
    validate_rollout(params, states, noise, horizon, env)?;
    let mut margin = f64::INFINITY;
    for (i, initial) in states.iter().enumerate() {
        let mut state = initial.clone();
        for step in 0..horizon {
            let features = env.features_of(&state);
            let (action, relu_margin) = params.forward_min_relu_margin(&features);
            margin = margin.min(relu_margin);
            if env.spread_of(&state) > 0.0 {
                margin = margin.min((action - state.last_weight).abs());
            }
            if let Some(mw) = &env.risk.max_weight {
                margin = margin.min((action.abs() - mw.m).abs());
            }
            if step + 1 < horizon {
                let noise_step: Vec<f64> =
                    (0..noise.comps).map(|c| noise.at(i, step, c)).collect();
                state = env.transition(&state, action, &noise_step);
            }
        }
    }
    Ok(margin)
}
