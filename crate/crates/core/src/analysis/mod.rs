//! Policies turned into data: action curves, trading bounds, simulated
//! trajectories, correlation tables, heat-maps and horizon studies. Every
//! operation is read-only over the policy and environment.

mod csv;

pub use csv::{
    write_action_curves_csv, write_bands_csv, write_correlations_csv, write_heatmap_csv,
    write_horizon_csv, write_myopic_target_csv, write_trajectory_csv,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{sample_initial_states, AlphaModel, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::{ActionPolicy, Architecture};
use crate::train::{train, TrainConfig};

/// One simulated step: state, chosen weight, trade and reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajStep {
    pub t: usize,
    pub alpha: Vec<f64>,
    pub alpha_total: f64,
    pub weight: f64,
    pub trade: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajStep>,
}

/// Roll a policy forward with fresh noise, discarding `burn_in` steps.
/// Deterministic for a given seed.
pub fn simulate_trajectory(
    policy: &dyn ActionPolicy,
    env: &EnvSpec,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<Trajectory> {
    if steps <= burn_in {
        return Err(Error::Usage(format!(
            "need more steps ({steps}) than burn-in ({burn_in})"
        )));
    }
    env.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = sample_initial_states(env, 1, &mut rng).remove(0);
    let comps = env.alpha.components();
    let mut traj = Trajectory::default();
    let mut noise = vec![0.0; comps];
    for t in 0..steps {
        let features = env.features_of(&state);
        let weight = policy.action(&features);
        let reward = env.reward(&state, weight);
        if t >= burn_in {
            traj.steps.push(TrajStep {
                t: t - burn_in,
                alpha: state.alpha.clone(),
                alpha_total: state.alpha_total(),
                weight,
                trade: weight - state.last_weight,
                reward,
            });
        }
        for n in noise.iter_mut() {
            *n = rng.sample(StandardNormal);
        }
        state = env.transition(&state, weight, &noise);
    }
    Ok(traj)
}

/// Long-run mean reward per step with a batch-means standard error.
pub fn steady_state_reward(
    policy: &dyn ActionPolicy,
    env: &EnvSpec,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if burn_in > 0 && steps < 10 * burn_in {
        return Err(Error::Usage(format!(
            "steady-state estimate wants steps >= 10x burn-in, got {steps} vs {burn_in}"
        )));
    }
    env.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = sample_initial_states(env, 1, &mut rng).remove(0);
    let comps = env.alpha.components();
    let mut noise = vec![0.0; comps];
    let kept = steps - burn_in;
    let mut rewards = Vec::with_capacity(kept);
    for t in 0..steps {
        let features = env.features_of(&state);
        let weight = policy.action(&features);
        if t >= burn_in {
            rewards.push(env.reward(&state, weight));
        }
        for n in noise.iter_mut() {
            *n = rng.sample(StandardNormal);
        }
        state = env.transition(&state, weight, &noise);
    }
    let mean = rewards.iter().sum::<f64>() / kept as f64;
    // Batch means absorb the serial correlation of the alpha process.
    let n_batches = 25.min(kept);
    let batch_len = kept / n_batches;
    let mut batch_means = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let chunk = &rewards[b * batch_len..(b + 1) * batch_len];
        batch_means.push(chunk.iter().sum::<f64>() / batch_len as f64);
    }
    let bm = batch_means.iter().sum::<f64>() / n_batches as f64;
    let var = batch_means.iter().map(|m| (m - bm) * (m - bm)).sum::<f64>()
        / (n_batches.saturating_sub(1).max(1)) as f64;
    let stderr = (var / n_batches as f64).sqrt();
    Ok((mean, stderr))
}

/// Probe layout for action curves: the x axis sweeps the (slow) alpha while
/// the fast component and any static features stay fixed.
#[derive(Debug, Clone)]
pub struct CurveSpec {
    pub alpha_grid: Vec<f64>,
    pub lw_values: Vec<f64>,
    pub fast_alpha: f64,
    pub statics: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ActionCurves {
    /// `(alpha, lw, action)` triples, lw-major.
    pub points: Vec<(f64, f64, f64)>,
    /// The frictionless target `alpha_total / λ`, when defined.
    pub myopic: Option<Vec<(f64, f64)>>,
}

pub fn probe_action_curve(
    policy: &dyn ActionPolicy,
    env: &EnvSpec,
    spec: &CurveSpec,
) -> Result<ActionCurves> {
    if spec.statics.len() != env.statics.len() {
        return Err(Error::Usage(format!(
            "curve probe has {} static values but the environment declares {}",
            spec.statics.len(),
            env.statics.len()
        )));
    }
    let mut points = Vec::with_capacity(spec.alpha_grid.len() * spec.lw_values.len());
    for &lw in &spec.lw_values {
        for &alpha in &spec.alpha_grid {
            let features = match env.alpha {
                AlphaModel::Mono { .. } => {
                    env.features_from_parts(&[alpha], lw, &spec.statics)
                }
                AlphaModel::TwoScale { .. } => {
                    env.features_from_parts(&[alpha, spec.fast_alpha], lw, &spec.statics)
                }
            };
            points.push((alpha, lw, policy.action(&features)));
        }
    }
    let myopic = if env.risk.l2_lambda > 0.0 {
        Some(
            spec.alpha_grid
                .iter()
                .map(|&alpha| (alpha, (alpha + spec.fast_alpha) / env.risk.l2_lambda))
                .collect(),
        )
    } else {
        None
    };
    Ok(ActionCurves { points, myopic })
}

/// Trading bounds at one last weight, relative to it. `upper` is the
/// smallest alpha that triggers a buy minus the last weight, `lower` the
/// largest alpha that triggers a sell minus the last weight; `None` when the
/// scanned alpha axis never triggers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRow {
    pub lw: f64,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
}

impl BandRow {
    /// Width of the no-trade interval in alpha units.
    pub fn width(&self) -> Option<f64> {
        match (self.upper, self.lower) {
            (Some(u), Some(l)) => Some(u - l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BandReport {
    pub rows: Vec<BandRow>,
    pub eps: f64,
}

/// Scan an action function over the alpha grid at each last weight and
/// report where it starts trading. Band edges outside the grid are reported
/// as missing, never extrapolated.
pub fn extract_bands(
    action: &dyn Fn(f64, f64) -> f64,
    lw_values: &[f64],
    alpha_grid: &[f64],
    eps: f64,
) -> BandReport {
    assert!(eps > 0.0, "trade threshold must be positive");
    let rows = lw_values
        .iter()
        .map(|&lw| {
            let mut upper = None;
            let mut lower = None;
            for &alpha in alpha_grid {
                let delta = action(alpha, lw) - lw;
                if upper.is_none() && delta > eps {
                    upper = Some(alpha - lw);
                }
                if delta < -eps {
                    lower = Some(alpha - lw);
                }
            }
            BandRow { lw, upper, lower }
        })
        .collect();
    BandReport { rows, eps }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeClass {
    Sell,
    Hold,
    Buy,
}

impl TradeClass {
    pub fn label(&self) -> &'static str {
        match self {
            TradeClass::Sell => "sell",
            TradeClass::Hold => "hold",
            TradeClass::Buy => "buy",
        }
    }
}

/// Heat-map of the action over (slow alpha, short-term alpha) at a fixed
/// last weight; `class[i_short * n_slow + j_slow]` classifies the trade.
#[derive(Debug, Clone)]
pub struct HeatmapGrid {
    pub slow_axis: Vec<f64>,
    pub short_axis: Vec<f64>,
    pub class: Vec<TradeClass>,
    pub action: Vec<f64>,
}

/// Probe a two-scale policy over slow alpha versus
/// short-term (total) alpha, feeding `fast = short - slow` to the network.
pub fn no_trade_heatmap(
    policy: &dyn ActionPolicy,
    env: &EnvSpec,
    lw: f64,
    statics: &[f64],
    slow_axis: &[f64],
    short_axis: &[f64],
    eps: f64,
) -> Result<HeatmapGrid> {
    if env.alpha.components() != 2 {
        return Err(Error::Usage("the heat-map probe needs a two-scale environment".into()));
    }
    if statics.len() != env.statics.len() {
        return Err(Error::Usage("heat-map statics do not match the environment".into()));
    }
    let n_slow = slow_axis.len();
    let mut class = Vec::with_capacity(n_slow * short_axis.len());
    let mut action = Vec::with_capacity(n_slow * short_axis.len());
    for &short in short_axis {
        for &slow in slow_axis {
            let fast = short - slow;
            let features = env.features_from_parts(&[slow, fast], lw, statics);
            let a = policy.action(&features);
            let delta = a - lw;
            class.push(if delta > eps {
                TradeClass::Buy
            } else if delta < -eps {
                TradeClass::Sell
            } else {
                TradeClass::Hold
            });
            action.push(a);
        }
    }
    Ok(HeatmapGrid {
        slow_axis: slow_axis.to_vec(),
        short_axis: short_axis.to_vec(),
        class,
        action,
    })
}

pub const CORRELATION_LABELS: [&str; 4] = ["slow_alpha", "fast_alpha", "weight", "trade"];

/// Pearson correlations between the slow alpha, fast alpha, weight and trade
/// series of a two-scale trajectory. Zero-variance series yield `None`
/// entries instead of NaNs; `low_sample` flags runs shorter than 10⁵ steps.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub labels: [&'static str; 4],
    pub values: [[Option<f64>; 4]; 4],
    pub low_sample: bool,
}

pub fn correlation_matrix(traj: &Trajectory) -> Result<CorrelationMatrix> {
    let first = traj
        .steps
        .first()
        .ok_or_else(|| Error::Usage("cannot correlate an empty trajectory".into()))?;
    if first.alpha.len() != 2 {
        return Err(Error::Usage(
            "the correlation table is defined for two-scale trajectories".into(),
        ));
    }
    let n = traj.steps.len();
    let series: [Vec<f64>; 4] = [
        traj.steps.iter().map(|s| s.alpha[0]).collect(),
        traj.steps.iter().map(|s| s.alpha[1]).collect(),
        traj.steps.iter().map(|s| s.weight).collect(),
        traj.steps.iter().map(|s| s.trade).collect(),
    ];
    let means: Vec<f64> = series.iter().map(|s| s.iter().sum::<f64>() / n as f64).collect();
    let vars: Vec<f64> = series
        .iter()
        .zip(&means)
        .map(|(s, m)| s.iter().map(|x| (x - m) * (x - m)).sum::<f64>())
        .collect();
    let mut values = [[None; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            if vars[i] > 0.0 && vars[j] > 0.0 {
                let cov: f64 = series[i]
                    .iter()
                    .zip(&series[j])
                    .map(|(a, b)| (a - means[i]) * (b - means[j]))
                    .sum();
                values[i][j] = Some(cov / (vars[i] * vars[j]).sqrt());
            }
        }
    }
    Ok(CorrelationMatrix {
        labels: CORRELATION_LABELS,
        values,
        low_sample: n < 100_000,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonPoint {
    pub horizon: usize,
    pub reward: f64,
    pub stderr: f64,
}

/// Train one policy per horizon (with the given budget template) and
/// evaluate each by its steady-state reward.
#[allow(clippy::too_many_arguments)]
pub fn reward_vs_horizon(
    env: &EnvSpec,
    hidden: &[usize],
    template: &TrainConfig,
    horizons: &[usize],
    eval_steps: usize,
    eval_burn_in: usize,
    eval_seed: u64,
) -> Result<Vec<HorizonPoint>> {
    if !horizons.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Usage("horizon list must be strictly ascending".into()));
    }
    let arch = Architecture::new(env.feature_count(), hidden.to_vec())?;
    let mut out = Vec::with_capacity(horizons.len());
    for &horizon in horizons {
        let config = TrainConfig { horizon, ..template.clone() };
        let (params, _) = train(env, &arch, &config)?;
        let (reward, stderr) =
            steady_state_reward(&params, env, eval_steps, eval_burn_in, eval_seed)?;
        out.push(HorizonPoint { horizon, reward, stderr });
    }
    Ok(out)
}
