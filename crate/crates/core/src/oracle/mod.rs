//! Independent ground truth: a finite-horizon backward-induction solver on
//! discretized (alpha, last-weight) grids, a closed-form myopic optimum, and
//! a policy-versus-solver comparison report.
//!
//! Actions are restricted to the last-weight grid, so the next position is
//! always on-grid and only the alpha axis needs interpolation. The
//! environment is odd-symmetric, so each step solves the alpha ≥ 0 half and
//! mirrors it; the produced tables are exactly symmetric.

mod quadrature;

pub use quadrature::GaussHermite;

use std::io::Write as _;
use std::path::Path;

use crate::analysis::steady_state_reward;
use crate::env::{cost_term, risk_term, stationary_std, AlphaModel, EnvSpec};
use crate::error::{Error, Result};
use crate::policy::ActionPolicy;

/// Discretization of the (alpha, last-weight) plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Alpha half-width in stationary standard deviations.
    pub alpha_halfwidth_stds: f64,
    /// Alpha grid points (odd, so zero is on-grid).
    pub n_alpha: usize,
    /// Last-weight half-width in weight units.
    pub lw_halfwidth: f64,
    /// Last-weight grid points (odd).
    pub n_lw: usize,
    /// Gauss–Hermite nodes for the expectation over innovations.
    pub gh_nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            alpha_halfwidth_stds: 4.0,
            n_alpha: 201,
            lw_halfwidth: 8.0,
            n_lw: 321,
            gh_nodes: 21,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_alpha < 3 || self.n_alpha % 2 == 0 || self.n_lw < 3 || self.n_lw % 2 == 0 {
            return Err(Error::Usage(
                "grid point counts must be odd and at least 3 so zero is on-grid".into(),
            ));
        }
        if !(self.alpha_halfwidth_stds >= 1.0) {
            return Err(Error::Usage(
                "alpha grid must span at least one stationary standard deviation".into(),
            ));
        }
        if !(self.lw_halfwidth > 0.0) || self.gh_nodes == 0 {
            return Err(Error::Usage("invalid grid: need lw_halfwidth > 0 and gh_nodes > 0".into()));
        }
        Ok(())
    }
}

/// Exactly symmetric uniform grid with `n` (odd) points over ±halfwidth.
fn symmetric_grid(halfwidth: f64, n: usize) -> Vec<f64> {
    let m = n / 2;
    let mut grid = vec![0.0; n];
    for i in 1..=m {
        let p = halfwidth * i as f64 / m as f64;
        grid[m + i] = p;
        grid[m - i] = -p;
    }
    grid
}

/// Optimal action and value grids from backward induction over `horizon`
/// steps; `action[i * n_lw + j]` is the optimal weight at `(alpha_i, lw_j)`.
#[derive(Debug, Clone)]
pub struct DpSolution {
    pub alpha_grid: Vec<f64>,
    pub lw_grid: Vec<f64>,
    pub action: Vec<f64>,
    pub value: Vec<f64>,
    pub horizon: usize,
}

/// Single-period optimum when trading is free: the weight maximizing
/// `w·alpha - λ/2·w²`, which is `alpha / λ`.
pub fn myopic_optimum(alpha_total: f64, env: &EnvSpec) -> Result<f64> {
    if !env.statics.is_empty() {
        return Err(Error::Usage(
            "myopic optimum needs a concrete environment; fix statics first".into(),
        ));
    }
    if env.cost.l1_spread != 0.0 || env.cost.l2_coeff != 0.0 {
        return Err(Error::Usage("myopic optimum is only exact with zero trading costs".into()));
    }
    let lambda = env.risk.l2_lambda;
    if !(lambda > 0.0) {
        return Err(Error::Usage(
            "myopic optimum is unbounded without quadratic risk aversion".into(),
        ));
    }
    let target = alpha_total / lambda;
    if let Some(mw) = &env.risk.max_weight {
        if target.abs() > mw.m {
            return Err(Error::Usage(format!(
                "myopic target {target} exceeds the max-weight threshold {}",
                mw.m
            )));
        }
    }
    Ok(target)
}

/// Solve the mono-scale environment by backward induction. `V_0 ≡ 0`; each
/// step maximizes reward plus the Gauss–Hermite expectation of the previous
/// value over the next alpha, with linear interpolation along alpha.
pub fn dp_solve(env: &EnvSpec, grid: &GridSpec, horizon: usize) -> Result<DpSolution> {
    env.validate()?;
    grid.validate()?;
    if horizon == 0 {
        return Err(Error::Usage("dp_solve needs a horizon of at least 1".into()));
    }
    if !env.statics.is_empty() {
        return Err(Error::Usage(
            "dp_solve needs a concrete environment; fix statics to point values first".into(),
        ));
    }
    let AlphaModel::Mono { rho, sigma } = env.alpha else {
        return Err(Error::Usage("dp_solve supports the mono-scale alpha model only".into()));
    };

    let sd_stat = stationary_std(rho, sigma);
    // A degenerate (sigma = 0) environment still gets a usable alpha axis.
    let alpha_halfwidth = if sd_stat > 0.0 { grid.alpha_halfwidth_stds * sd_stat } else { 1.0 };
    let alpha_grid = symmetric_grid(alpha_halfwidth, grid.n_alpha);
    let lw_grid = symmetric_grid(grid.lw_halfwidth, grid.n_lw);
    let (na, nw) = (grid.n_alpha, grid.n_lw);
    let center_a = na / 2;
    let center_w = nw / 2;

    let gh = GaussHermite::new(grid.gh_nodes)?;
    let gh_points = gh.std_normal_points();

    // Reward pieces that do not depend on the cell: the risk of each action
    // and the trading cost of each (action, last-weight) pair.
    let risk_of: Vec<f64> = lw_grid.iter().map(|&w| risk_term(w, &env.risk)).collect();
    let mut cost_of = vec![0.0; nw * nw]; // [j * nw + k]
    for (j, &lw) in lw_grid.iter().enumerate() {
        for (k, &w) in lw_grid.iter().enumerate() {
            cost_of[j * nw + k] = cost_term(w, lw, &env.cost);
        }
    }

    let step = if na > 1 { alpha_grid[1] - alpha_grid[0] } else { 1.0 };
    let mut value = vec![0.0; na * nw];
    let mut next_value = vec![0.0; na * nw];
    let mut action = vec![0.0; na * nw];
    let mut continuation = vec![0.0; (na - center_a) * nw];
    let mut base = vec![0.0; nw];

    for _ in 0..horizon {
        // Continuation W(i, k) = E[V(ρ·alpha_i + σ·N, w_k)] for the upper
        // half of the alpha axis.
        for i in center_a..na {
            let row = &mut continuation[(i - center_a) * nw..(i - center_a + 1) * nw];
            row.fill(0.0);
            for &(x, wgt) in &gh_points {
                let query = (rho * alpha_grid[i] + sigma * x)
                    .clamp(alpha_grid[0], alpha_grid[na - 1]);
                let mut i0 = ((query - alpha_grid[0]) / step).floor() as usize;
                i0 = i0.min(na - 2);
                let denom = alpha_grid[i0 + 1] - alpha_grid[i0];
                let frac = ((query - alpha_grid[i0]) / denom).clamp(0.0, 1.0);
                let (w_lo, w_hi) = (wgt * (1.0 - frac), wgt * frac);
                let v_lo = &value[i0 * nw..(i0 + 1) * nw];
                let v_hi = &value[(i0 + 1) * nw..(i0 + 2) * nw];
                for k in 0..nw {
                    row[k] += w_lo * v_lo[k] + w_hi * v_hi[k];
                }
            }
        }

        for i in center_a..na {
            let alpha = alpha_grid[i];
            let cont = &continuation[(i - center_a) * nw..(i - center_a + 1) * nw];
            for k in 0..nw {
                base[k] = alpha * lw_grid[k] - risk_of[k] + cont[k];
            }
            let j_start = if i == center_a { center_w } else { 0 };
            for j in j_start..nw {
                let costs = &cost_of[j * nw..(j + 1) * nw];
                // Pass 1: the optimal value.
                let mut best = f64::NEG_INFINITY;
                for k in 0..nw {
                    let v = base[k] - costs[k];
                    if v > best {
                        best = v;
                    }
                }
                // Pass 2: among the maximizers, prefer the smallest trade;
                // break remaining ties toward the side of the alpha (or, at
                // alpha = 0, of the last weight).
                let lw = lw_grid[j];
                let side = if alpha > 0.0 {
                    1.0
                } else if alpha < 0.0 {
                    -1.0
                } else if lw > 0.0 {
                    1.0
                } else if lw < 0.0 {
                    -1.0
                } else {
                    1.0
                };
                let mut best_k = usize::MAX;
                let mut best_trade = f64::INFINITY;
                for k in 0..nw {
                    if base[k] - costs[k] == best {
                        let trade = (lw_grid[k] - lw).abs();
                        let better = trade < best_trade
                            || (trade == best_trade
                                && best_k != usize::MAX
                                && (lw_grid[k] - lw) * side
                                    > (lw_grid[best_k] - lw) * side);
                        if best_k == usize::MAX || better {
                            best_k = k;
                            best_trade = trade;
                        }
                    }
                }
                next_value[i * nw + j] = best;
                action[i * nw + j] = lw_grid[best_k];
                // Mirror cell: V(-alpha, -lw) = V(alpha, lw), a*(-alpha, -lw) = -a*.
                let (mi, mj) = (na - 1 - i, nw - 1 - j);
                if (mi, mj) != (i, j) {
                    next_value[mi * nw + mj] = best;
                    action[mi * nw + mj] = -lw_grid[best_k];
                }
            }
        }
        std::mem::swap(&mut value, &mut next_value);
    }

    Ok(DpSolution { alpha_grid, lw_grid, action, value, horizon })
}

impl DpSolution {
    fn interp_indices(grid: &[f64], x: f64) -> (usize, f64) {
        let n = grid.len();
        let x = x.clamp(grid[0], grid[n - 1]);
        let step = grid[1] - grid[0];
        let mut i0 = ((x - grid[0]) / step).floor() as usize;
        i0 = i0.min(n - 2);
        let frac = ((x - grid[i0]) / (grid[i0 + 1] - grid[i0])).clamp(0.0, 1.0);
        (i0, frac)
    }

    /// Bilinear interpolation of the optimal action (clamped at the edges).
    pub fn action_at(&self, alpha: f64, lw: f64) -> f64 {
        let nw = self.lw_grid.len();
        let (i0, fa) = Self::interp_indices(&self.alpha_grid, alpha);
        let (j0, fw) = Self::interp_indices(&self.lw_grid, lw);
        let a00 = self.action[i0 * nw + j0];
        let a01 = self.action[i0 * nw + j0 + 1];
        let a10 = self.action[(i0 + 1) * nw + j0];
        let a11 = self.action[(i0 + 1) * nw + j0 + 1];
        (1.0 - fa) * ((1.0 - fw) * a00 + fw * a01) + fa * ((1.0 - fw) * a10 + fw * a11)
    }

    /// Optimal action at exact grid indices.
    pub fn action_at_index(&self, i_alpha: usize, j_lw: usize) -> f64 {
        self.action[i_alpha * self.lw_grid.len() + j_lw]
    }

    pub fn value_at_index(&self, i_alpha: usize, j_lw: usize) -> f64 {
        self.value[i_alpha * self.lw_grid.len() + j_lw]
    }

    /// Export as CSV with columns `alpha,lw,action,value`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("alpha,lw,action,value\n");
        let nw = self.lw_grid.len();
        for (i, &alpha) in self.alpha_grid.iter().enumerate() {
            for (j, &lw) in self.lw_grid.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    alpha,
                    lw,
                    self.action[i * nw + j],
                    self.value[i * nw + j]
                ));
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Load a solution previously written by [`DpSolution::save_csv`].
    pub fn load_csv(path: &Path) -> Result<DpSolution> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header.trim() != "alpha,lw,action,value" {
            return Err(Error::Config(format!(
                "unexpected solution header `{header}` in {}",
                path.display()
            )));
        }
        let mut alpha_grid: Vec<f64> = Vec::new();
        let mut lw_grid: Vec<f64> = Vec::new();
        let mut action = Vec::new();
        let mut value = Vec::new();
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::Config(format!("bad row {} in solution file", ln + 2)));
            }
            let parse = |s: &str| -> Result<f64> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{s}` in solution file")))
            };
            let (alpha, lw) = (parse(fields[0])?, parse(fields[1])?);
            if alpha_grid.last() != Some(&alpha) {
                alpha_grid.push(alpha);
            }
            if alpha_grid.len() == 1 {
                lw_grid.push(lw);
            }
            action.push(parse(fields[2])?);
            value.push(parse(fields[3])?);
        }
        if alpha_grid.len() * lw_grid.len() != action.len() || action.is_empty() {
            return Err(Error::Config("solution file is not a complete grid".into()));
        }
        Ok(DpSolution { alpha_grid, lw_grid, action, value, horizon: 0 })
    }
}

/// A solved grid acts as a policy over `[alpha, lw]` features.
impl ActionPolicy for DpSolution {
    fn action(&self, features: &[f64]) -> f64 {
        self.action_at(features[0], features[1])
    }
}

/// Options for [`compare_policy`]: the probe region keeps grid points whose
/// alpha is likely under the stationary law and whose last weight is in the
/// visited range; rewards come from simulating both policies on one stream.
#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub alpha_std_cut: f64,
    pub lw_cut: f64,
    pub sim_steps: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { alpha_std_cut: 3.0, lw_cut: 4.0, sim_steps: 100_000, burn_in: 1000, seed: 7 }
    }
}

#[derive(Debug, Clone)]
pub struct PolicyComparison {
    pub action_rms: f64,
    pub probe_points: usize,
    pub policy_reward: f64,
    pub policy_stderr: f64,
    pub oracle_reward: f64,
    pub oracle_stderr: f64,
    /// `policy_reward / oracle_reward`.
    pub reward_ratio: f64,
}

/// RMS action deviation over the probe region plus the steady-state reward
/// gap, with both policies simulated on the same noise stream.
pub fn compare_policy(
    policy: &dyn ActionPolicy,
    dp: &DpSolution,
    env: &EnvSpec,
    opts: &CompareOptions,
) -> Result<PolicyComparison> {
    let AlphaModel::Mono { rho, sigma } = env.alpha else {
        return Err(Error::Usage("compare_policy needs the mono-scale model".into()));
    };
    if !env.statics.is_empty() {
        return Err(Error::Usage("compare_policy needs a concrete environment".into()));
    }
    let sd_stat = stationary_std(rho, sigma);
    let alpha_cut = opts.alpha_std_cut * sd_stat;
    let nw = dp.lw_grid.len();
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    for (i, &alpha) in dp.alpha_grid.iter().enumerate() {
        if alpha.abs() > alpha_cut {
            continue;
        }
        for (j, &lw) in dp.lw_grid.iter().enumerate() {
            if lw.abs() > opts.lw_cut {
                continue;
            }
            let diff = policy.action(&[alpha, lw]) - dp.action[i * nw + j];
            sq_sum += diff * diff;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Usage("empty probe region".into()));
    }
    let action_rms = (sq_sum / count as f64).sqrt();

    let (policy_reward, policy_stderr) =
        steady_state_reward(policy, env, opts.sim_steps, opts.burn_in, opts.seed)?;
    let (oracle_reward, oracle_stderr) =
        steady_state_reward(dp, env, opts.sim_steps, opts.burn_in, opts.seed)?;
    Ok(PolicyComparison {
        action_rms,
        probe_points: count,
        policy_reward,
        policy_stderr,
        oracle_reward,
        oracle_stderr,
        reward_ratio: policy_reward / oracle_reward,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{preset, CostSpec};

    fn small_grid() -> GridSpec {
        GridSpec { n_alpha: 101, n_lw: 161, ..GridSpec::default() }
    }

    #[test]
    fn myopic_examples() {
        let mut env = preset("mono_l1").unwrap();
        env.cost = CostSpec { l1_spread: 0.0, l2_coeff: 0.0 };
        assert_eq!(myopic_optimum(2.0, &env).unwrap(), 2.0);
        assert_eq!(myopic_optimum(0.0, &env).unwrap(), 0.0);
        env.risk.l2_lambda = 2.0;
        assert_eq!(myopic_optimum(-3.0, &env).unwrap(), -1.5);
    }

    #[test]
    fn myopic_rejects_unbounded_and_costly_setups() {
        let env = preset("mono_l1").unwrap();
        // costs nonzero
        assert!(matches!(myopic_optimum(1.0, &env), Err(Error::Usage(_))));
        let mut maxw = preset("mono_maxw").unwrap();
        maxw.cost = CostSpec { l1_spread: 0.0, l2_coeff: 0.0 };
        // lambda = 0
        assert!(matches!(myopic_optimum(1.0, &maxw), Err(Error::Usage(_))));
    }

    #[test]
    fn one_step_costless_solution_is_the_nearest_grid_target() {
        let mut env = preset("mono_l1").unwrap();
        env.cost = CostSpec { l1_spread: 0.0, l2_coeff: 0.0 };
        let grid = small_grid();
        let dp = dp_solve(&env, &grid, 1).unwrap();
        let nw = dp.lw_grid.len();
        for (i, &alpha) in dp.alpha_grid.iter().enumerate() {
            // nearest grid point to the target alpha/lambda = alpha
            let nearest = dp
                .lw_grid
                .iter()
                .cloned()
                .min_by(|a, b| {
                    (a - alpha).abs().partial_cmp(&(b - alpha).abs()).unwrap()
                })
                .unwrap();
            for j in 0..nw {
                assert_eq!(
                    dp.action[i * nw + j],
                    nearest,
                    "alpha {alpha} lw {}",
                    dp.lw_grid[j]
                );
            }
        }
    }

    #[test]
    fn spread_creates_a_no_trade_band_at_zero_weight() {
        let env = preset("mono_l1").unwrap();
        let dp = dp_solve(&env, &small_grid(), 50).unwrap();
        let nw = dp.lw_grid.len();
        let center_w = nw / 2;
        let center_a = dp.alpha_grid.len() / 2;
        // Around alpha = 0 the optimal action holds the zero position.
        let mut band_points = 0;
        for (i, &alpha) in dp.alpha_grid.iter().enumerate() {
            if dp.action[i * nw + center_w] == 0.0 {
                band_points += 1;
                assert!(alpha.abs() < 4.0, "no-trade at implausibly large alpha {alpha}");
            }
        }
        assert!(band_points > 5, "no band found");
        assert_eq!(dp.action[center_a * nw + center_w], 0.0);
        // Far out in alpha the policy trades.
        assert!(dp.action[(dp.alpha_grid.len() - 1) * nw + center_w] > 0.0);
    }

    #[test]
    fn actions_are_monotone_in_alpha_and_exactly_odd_symmetric() {
        let env = preset("mono_l1").unwrap();
        let dp = dp_solve(&env, &small_grid(), 20).unwrap();
        let (na, nw) = (dp.alpha_grid.len(), dp.lw_grid.len());
        for j in 0..nw {
            for i in 1..na {
                assert!(
                    dp.action[i * nw + j] >= dp.action[(i - 1) * nw + j],
                    "action decreasing in alpha at lw {}",
                    dp.lw_grid[j]
                );
            }
        }
        for i in 0..na {
            for j in 0..nw {
                let a = dp.action[i * nw + j];
                let mirrored = dp.action[(na - 1 - i) * nw + (nw - 1 - j)];
                assert_eq!(a, -mirrored, "symmetry broken at ({i},{j})");
                let v = dp.value[i * nw + j];
                let v_mirrored = dp.value[(na - 1 - i) * nw + (nw - 1 - j)];
                assert_eq!(v, v_mirrored);
            }
        }
    }

    #[test]
    fn degenerate_alpha_trades_only_large_positions_toward_zero() {
        // sigma = 0 and alpha = 0: holding costs lambda/2 w^2 per step, so
        // over two steps it pays to unwind a position only when the risk
        // saved beats the spread.
        let mut env = preset("mono_l1").unwrap();
        if let crate::env::AlphaModel::Mono { rho, .. } = env.alpha {
            env.alpha = crate::env::AlphaModel::Mono { rho, sigma: 0.0 };
        }
        let dp = dp_solve(&env, &small_grid(), 2).unwrap();
        let nw = dp.lw_grid.len();
        let center_a = dp.alpha_grid.len() / 2;
        for (j, &lw) in dp.lw_grid.iter().enumerate() {
            let a = dp.action[center_a * nw + j];
            if lw.abs() <= 1.5 {
                assert_eq!(a, lw, "small position should not move (lw = {lw})");
            }
            if lw.abs() >= 7.5 {
                assert!(a.abs() < lw.abs(), "large position should unwind (lw = {lw})");
            }
        }
    }

    #[test]
    fn value_gain_per_extra_step_is_bounded_by_per_step_rewards() {
        let env = preset("mono_l1").unwrap();
        let grid = GridSpec { n_alpha: 41, n_lw: 41, ..GridSpec::default() };
        let v3 = dp_solve(&env, &grid, 3).unwrap();
        let v4 = dp_solve(&env, &grid, 4).unwrap();
        // Per-step reward bounds over the grid and action set.
        let mut r_min = f64::INFINITY;
        let mut r_max = f64::NEG_INFINITY;
        for &alpha in &v3.alpha_grid {
            for &lw in &v3.lw_grid {
                for &w in &v3.lw_grid {
                    let r = alpha * w
                        - crate::env::risk_term(w, &env.risk)
                        - crate::env::cost_term(w, lw, &env.cost);
                    r_min = r_min.min(r);
                    r_max = r_max.max(r);
                }
            }
        }
        for (a, b) in v4.value.iter().zip(&v3.value) {
            let gain = a - b;
            assert!(gain >= r_min - 1e-9 && gain <= r_max + 1e-9, "gain {gain}");
        }
    }

    #[test]
    fn csv_round_trip_preserves_the_solution() {
        let env = preset("mono_l1").unwrap();
        let grid = GridSpec { n_alpha: 21, n_lw: 21, ..GridSpec::default() };
        let dp = dp_solve(&env, &grid, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dp.csv");
        dp.save_csv(&path).unwrap();
        let loaded = DpSolution::load_csv(&path).unwrap();
        assert_eq!(loaded.alpha_grid.len(), 21);
        assert_eq!(loaded.lw_grid.len(), 21);
        for (a, b) in loaded.action.iter().zip(&dp.action) {
            assert_eq!(a, b);
        }
        for (a, b) in loaded.value.iter().zip(&dp.value) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn comparing_the_solver_with_itself_is_exact() {
        let env = preset("mono_l1").unwrap();
        let dp = dp_solve(&env, &small_grid(), 20).unwrap();
        let opts = CompareOptions { sim_steps: 20_000, burn_in: 500, ..Default::default() };
        let report = compare_policy(&dp, &dp, &env, &opts).unwrap();
        assert_eq!(report.action_rms, 0.0);
        assert_eq!(report.reward_ratio, 1.0);
        assert!(report.oracle_reward > 0.0, "optimal play should be profitable");
    }

    #[test]
    fn zero_policy_loses_to_the_solver() {
        struct ZeroPolicy;
        impl ActionPolicy for ZeroPolicy {
            fn action(&self, _: &[f64]) -> f64 {
                0.0
            }
        }
        let env = preset("mono_l1").unwrap();
        let dp = dp_solve(&env, &small_grid(), 20).unwrap();
        let opts = CompareOptions { sim_steps: 20_000, burn_in: 500, ..Default::default() };
        let report = compare_policy(&ZeroPolicy, &dp, &env, &opts).unwrap();
        assert!(report.reward_ratio < 0.5, "ratio {}", report.reward_ratio);
        assert!(report.action_rms > 0.1);
    }

    #[test]
    fn two_scale_and_lifted_environments_are_rejected() {
        let err = dp_solve(&preset("twoscale_l1").unwrap(), &small_grid(), 5);
        assert!(matches!(err, Err(Error::Usage(_))));
        let err = dp_solve(&preset("mono_varsigma").unwrap(), &small_grid(), 5);
        assert!(matches!(err, Err(Error::Usage(_))));
        // Fixing the static first makes it solvable.
        let fixed = preset("mono_varsigma").unwrap().with_statics_fixed(&[1.0]).unwrap();
        assert!(dp_solve(&fixed, &small_grid(), 2).is_ok());
    }
}
