//! Trading environments: differentiable transition and reward functions with
//! explicit noise, state sampling, and environment parameters lifted into
//! static state dimensions.
//!
//! A state is `(alpha components, last weight, static features)`. The reward
//! is `w·alpha_total - risk(w) - cost(w, lw)`; the transition advances each
//! alpha component through its AR(1) recursion and stores the action as the
//! next last weight.

mod config;
mod sample;
mod tape_ops;

pub use config::{content_hash, from_toml_str, preset, preset_names, to_toml_string};
pub use sample::{sample_initial_states, sample_noise, NoiseTensor};
pub use tape_ops::{initial_rows, reward_row, transition_rows, EnvRows};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Alpha signal dynamics: one AR(1) process, or the sum of an independent
/// slow and fast pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaModel {
    Mono { rho: f64, sigma: f64 },
    TwoScale { rho_s: f64, sigma_s: f64, rho_f: f64, sigma_f: f64 },
}

impl AlphaModel {
    pub fn components(&self) -> usize {
        match self {
            AlphaModel::Mono { .. } => 1,
            AlphaModel::TwoScale { .. } => 2,
        }
    }

    /// `(rho, sigma)` per component, slow before fast.
    pub fn component_params(&self) -> Vec<(f64, f64)> {
        match *self {
            AlphaModel::Mono { rho, sigma } => vec![(rho, sigma)],
            AlphaModel::TwoScale { rho_s, sigma_s, rho_f, sigma_f } => {
                vec![(rho_s, sigma_s), (rho_f, sigma_f)]
            }
        }
    }
}

/// Soft position limit: penalty `k·(|w| - m)₊`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxWeight {
    pub m: f64,
    pub k: f64,
}

/// Risk penalty: quadratic aversion plus optional soft max-weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    #[serde(default)]
    pub l2_lambda: f64,
    #[serde(default)]
    pub max_weight: Option<MaxWeight>,
}

/// Trading cost: spread (proportional to turnover) plus quadratic impact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    #[serde(default)]
    pub l1_spread: f64,
    #[serde(default)]
    pub l2_coeff: f64,
}

/// Environment parameters that can be lifted into the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticParam {
    /// Alpha volatility of a mono-scale model.
    Sigma,
    /// Proportional cost coefficient.
    L1Spread,
}

impl StaticParam {
    pub fn label(&self) -> &'static str {
        match self {
            StaticParam::Sigma => "sigma",
            StaticParam::L1Spread => "l1_spread",
        }
    }
}

/// A lifted parameter and its sampling range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticParamDecl {
    pub name: StaticParam,
    pub lo: f64,
    pub hi: f64,
}

fn default_lw_init_range() -> [f64; 2] {
    [-6.0, 6.0]
}

/// Full environment description. Immutable after validation; every operation
/// taking an `EnvSpec` is pure given explicit rng state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub alpha: AlphaModel,
    pub risk: RiskSpec,
    pub cost: CostSpec,
    #[serde(default)]
    pub statics: Vec<StaticParamDecl>,
    #[serde(default = "default_lw_init_range")]
    pub lw_init_range: [f64; 2],
}

/// Environment state: alpha components, the position held entering the
/// period, and any lifted static features (in declaration order).
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub alpha: Vec<f64>,
    pub last_weight: f64,
    pub statics: Vec<f64>,
}

impl State {
    pub fn alpha_total(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

/// Stationary standard deviation of an AR(1) process.
pub fn stationary_std(rho: f64, sigma: f64) -> f64 {
    sigma / (1.0 - rho * rho).sqrt()
}

/// `λ/2·w² + k·(|w| - m)₊`; absent parts contribute zero.
pub fn risk_term(w: f64, spec: &RiskSpec) -> f64 {
    let mut risk = 0.5 * spec.l2_lambda * w * w;
    if let Some(mw) = &spec.max_weight {
        risk += mw.k * (w.abs() - mw.m).max(0.0);
    }
    risk
}

/// `s·|w - lw| + c·(w - lw)²`.
pub fn cost_term(w: f64, lw: f64, spec: &CostSpec) -> f64 {
    let d = w - lw;
    spec.l1_spread * d.abs() + spec.l2_coeff * d * d
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, (rho, sigma)) in self.alpha.component_params().into_iter().enumerate() {
            if !(rho.abs() < 1.0) {
                return Err(Error::Config(format!(
                    "alpha component {i}: |rho| must be < 1 for stationarity, got {rho}"
                )));
            }
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(Error::Config(format!(
                    "alpha component {i}: sigma must be finite and >= 0, got {sigma}"
                )));
            }
        }
        if !(self.risk.l2_lambda >= 0.0) {
            return Err(Error::Config("risk.l2_lambda must be >= 0".into()));
        }
        if let Some(mw) = &self.risk.max_weight {
            if !(mw.m > 0.0 && mw.k > 0.0) {
                return Err(Error::Config("risk.max_weight needs m > 0 and k > 0".into()));
            }
        }
        if self.risk.l2_lambda == 0.0 && self.risk.max_weight.is_none() {
            return Err(Error::Config(
                "risk must have l2_lambda > 0 or a max_weight penalty; rewards are otherwise \
                 unbounded in the weight"
                    .into(),
            ));
        }
        if !(self.cost.l1_spread >= 0.0 && self.cost.l2_coeff >= 0.0) {
            return Err(Error::Config("cost coefficients must be >= 0".into()));
        }
        let mut seen = Vec::new();
        for decl in &self.statics {
            if seen.contains(&decl.name) {
                return Err(Error::Config(format!(
                    "static parameter `{}` declared twice",
                    decl.name.label()
                )));
            }
            seen.push(decl.name);
            if !(decl.lo <= decl.hi) || !decl.lo.is_finite() || !decl.hi.is_finite() {
                return Err(Error::Config(format!(
                    "static `{}` range [{}, {}] is invalid",
                    decl.name.label(),
                    decl.lo,
                    decl.hi
                )));
            }
            if decl.name == StaticParam::Sigma && self.alpha.components() != 1 {
                return Err(Error::Usage(
                    "static `sigma` is only defined for the mono-scale alpha model".into(),
                ));
            }
        }
        if !(self.lw_init_range[0] <= self.lw_init_range[1])
            || !self.lw_init_range.iter().all(|v| v.is_finite())
        {
            return Err(Error::Config("lw_init_range must be finite with lo <= hi".into()));
        }
        Ok(())
    }

    /// Number of network input features: alpha components, last weight, then
    /// one feature per declared static.
    pub fn feature_count(&self) -> usize {
        self.alpha.components() + 1 + self.statics.len()
    }

    /// Feature names in network input order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = match self.alpha {
            AlphaModel::Mono { .. } => vec!["alpha".into()],
            AlphaModel::TwoScale { .. } => vec!["alpha_slow".into(), "alpha_fast".into()],
        };
        names.push("last_weight".into());
        names.extend(self.statics.iter().map(|d| d.name.label().to_string()));
        names
    }

    pub fn features_of(&self, state: &State) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.feature_count());
        out.extend_from_slice(&state.alpha);
        out.push(state.last_weight);
        out.extend_from_slice(&state.statics);
        out
    }

    pub fn features_from_parts(&self, alpha: &[f64], lw: f64, statics: &[f64]) -> Vec<f64> {
        assert_eq!(alpha.len(), self.alpha.components());
        assert_eq!(statics.len(), self.statics.len());
        let mut out = Vec::with_capacity(self.feature_count());
        out.extend_from_slice(alpha);
        out.push(lw);
        out.extend_from_slice(statics);
        out
    }

    fn static_index(&self, name: StaticParam) -> Option<usize> {
        self.statics.iter().position(|d| d.name == name)
    }

    /// Effective spread for a state: the lifted feature when declared,
    /// otherwise the configured constant.
    pub fn spread_of(&self, state: &State) -> f64 {
        match self.static_index(StaticParam::L1Spread) {
            Some(i) => state.statics[i],
            None => self.cost.l1_spread,
        }
    }

    /// Effective alpha volatility of component `comp` for a state.
    pub fn sigma_of(&self, state: &State, comp: usize) -> f64 {
        if comp == 0 {
            if let Some(i) = self.static_index(StaticParam::Sigma) {
                return state.statics[i];
            }
        }
        self.alpha.component_params()[comp].1
    }

    /// One environment step: each alpha component follows its AR(1)
    /// recursion, the action becomes the next last weight, statics carry
    /// over unchanged.
    pub fn transition(&self, state: &State, action: f64, noise: &[f64]) -> State {
        let params = self.alpha.component_params();
        assert_eq!(noise.len(), params.len(), "one noise draw per alpha component");
        let alpha = params
            .iter()
            .enumerate()
            .map(|(c, &(rho, _))| rho * state.alpha[c] + self.sigma_of(state, c) * noise[c])
            .collect();
        State { alpha, last_weight: action, statics: state.statics.clone() }
    }

    /// Per-step reward `w·alpha_total - risk(w) - cost(w, lw)`.
    pub fn reward(&self, state: &State, action: f64) -> f64 {
        let spread = self.spread_of(state);
        let cost = CostSpec { l1_spread: spread, l2_coeff: self.cost.l2_coeff };
        action * state.alpha_total()
            - risk_term(action, &self.risk)
            - cost_term(action, state.last_weight, &cost)
    }

    /// Environment with declared statics replaced by fixed point values
    /// (used by the grid solver, which requires a concrete environment).
    pub fn with_statics_fixed(&self, values: &[f64]) -> Result<EnvSpec> {
        if values.len() != self.statics.len() {
            return Err(Error::Usage(format!(
                "expected {} static values, got {}",
                self.statics.len(),
                values.len()
            )));
        }
        let mut fixed = self.clone();
        for (decl, &v) in self.statics.iter().zip(values) {
            match decl.name {
                StaticParam::Sigma => {
                    if let AlphaModel::Mono { rho, .. } = fixed.alpha {
                        fixed.alpha = AlphaModel::Mono { rho, sigma: v };
                    }
                }
                StaticParam::L1Spread => fixed.cost.l1_spread = v,
            }
        }
        fixed.statics.clear();
        fixed.validate()?;
        Ok(fixed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mono_env(rho: f64, sigma: f64, lambda: f64, spread: f64) -> EnvSpec {
        EnvSpec {
            alpha: AlphaModel::Mono { rho, sigma },
            risk: RiskSpec { l2_lambda: lambda, max_weight: None },
            cost: CostSpec { l1_spread: spread, l2_coeff: 0.0 },
            statics: vec![],
            lw_init_range: [-6.0, 6.0],
        }
    }

    #[test]
    fn transition_follows_the_recursion() {
        let env = mono_env(0.9, 1.0, 1.0, 4.0);
        let s = State { alpha: vec![2.0], last_weight: 0.5, statics: vec![] };
        let next = env.transition(&s, 1.0, &[0.0]);
        assert_eq!(next.alpha[0], 1.8);
        assert_eq!(next.last_weight, 1.0);
        let next = env.transition(&s, 1.0, &[1.0]);
        assert!((next.alpha[0] - 2.8).abs() < 1e-15);
    }

    #[test]
    fn fast_component_with_zero_persistence_is_pure_noise() {
        let env = EnvSpec {
            alpha: AlphaModel::TwoScale { rho_s: 0.9, sigma_s: 1.0, rho_f: 0.0, sigma_f: 3.0 },
            risk: RiskSpec { l2_lambda: 1.0, max_weight: None },
            cost: CostSpec { l1_spread: 4.0, l2_coeff: 0.0 },
            statics: vec![],
            lw_init_range: [-6.0, 6.0],
        };
        let s = State { alpha: vec![1.0, 5.0], last_weight: 0.0, statics: vec![] };
        let next = env.transition(&s, 0.0, &[0.0, 0.2]);
        assert!((next.alpha[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn reward_examples() {
        let env = mono_env(0.9, 1.0, 1.0, 4.0);
        // No trade: only the quadratic risk bites.
        let s = State { alpha: vec![2.0], last_weight: 1.0, statics: vec![] };
        assert_eq!(env.reward(&s, 1.0), 2.0 - 0.5);
        // Unit trade costs the spread.
        let s = State { alpha: vec![2.0], last_weight: 0.0, statics: vec![] };
        assert_eq!(env.reward(&s, 1.0), 2.0 - 0.5 - 4.0);
    }

    #[test]
    fn max_weight_penalty_is_a_hinge() {
        let risk = RiskSpec {
            l2_lambda: 0.0,
            max_weight: Some(MaxWeight { m: 3.0, k: 10.0 }),
        };
        assert_eq!(risk_term(3.5, &risk), 5.0);
        assert_eq!(risk_term(-4.0, &risk), 10.0);
        assert_eq!(risk_term(2.0, &risk), 0.0);
        assert_eq!(risk_term(0.0, &risk), 0.0);
    }

    #[test]
    fn cost_term_examples() {
        let spec = CostSpec { l1_spread: 4.0, l2_coeff: 0.0 };
        assert_eq!(cost_term(1.0, 1.0, &spec), 0.0);
        assert_eq!(cost_term(1.0, 0.0, &spec), 4.0);
        let spec = CostSpec { l1_spread: 0.0, l2_coeff: 2.0 };
        assert_eq!(cost_term(1.0, -1.0, &spec), 8.0);
    }

    #[test]
    fn risk_term_quadratic() {
        let risk = RiskSpec { l2_lambda: 1.0, max_weight: None };
        assert_eq!(risk_term(2.0, &risk), 2.0);
    }

    #[test]
    fn statics_override_spec_values() {
        let mut env = mono_env(0.9, 1.0, 1.0, 4.0);
        env.statics.push(StaticParamDecl { name: StaticParam::L1Spread, lo: 0.0, hi: 6.0 });
        let s = State { alpha: vec![2.0], last_weight: 0.0, statics: vec![2.0] };
        assert_eq!(env.spread_of(&s), 2.0);
        assert_eq!(env.reward(&s, 1.0), 2.0 - 0.5 - 2.0);

        let mut env = mono_env(0.9, 1.0, 1.0, 4.0);
        env.statics.push(StaticParamDecl { name: StaticParam::Sigma, lo: 0.0, hi: 4.0 });
        let s = State { alpha: vec![2.0], last_weight: 0.0, statics: vec![3.0] };
        let next = env.transition(&s, 0.0, &[1.0]);
        assert!((next.alpha[0] - (0.9 * 2.0 + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn feature_layout_matches_declarations() {
        let mut env = mono_env(0.9, 1.0, 1.0, 4.0);
        assert_eq!(env.feature_count(), 2);
        env.statics.push(StaticParamDecl { name: StaticParam::Sigma, lo: 0.0, hi: 4.0 });
        assert_eq!(env.feature_count(), 3);
        assert_eq!(env.feature_names(), vec!["alpha", "last_weight", "sigma"]);

        let env2 = EnvSpec {
            alpha: AlphaModel::TwoScale { rho_s: 0.9, sigma_s: 1.0, rho_f: 0.0, sigma_f: 3.0 },
            risk: RiskSpec { l2_lambda: 1.0, max_weight: None },
            cost: CostSpec { l1_spread: 4.0, l2_coeff: 0.0 },
            statics: vec![StaticParamDecl { name: StaticParam::L1Spread, lo: 0.0, hi: 6.0 }],
            lw_init_range: [-6.0, 6.0],
        };
        assert_eq!(env2.feature_count(), 4);
    }

    #[test]
    fn sigma_static_rejected_for_two_scale() {
        let env = EnvSpec {
            alpha: AlphaModel::TwoScale { rho_s: 0.9, sigma_s: 1.0, rho_f: 0.0, sigma_f: 3.0 },
            risk: RiskSpec { l2_lambda: 1.0, max_weight: None },
            cost: CostSpec { l1_spread: 4.0, l2_coeff: 0.0 },
            statics: vec![StaticParamDecl { name: StaticParam::Sigma, lo: 0.0, hi: 4.0 }],
            lw_init_range: [-6.0, 6.0],
        };
        assert!(matches!(env.validate(), Err(Error::Usage(_))));
    }

    #[test]
    fn riskless_env_is_rejected() {
        let env = mono_env(0.9, 1.0, 0.0, 4.0);
        assert!(matches!(env.validate(), Err(Error::Config(_))));
    }

    proptest! {
        /// The environment is odd-symmetric: flipping the sign of alphas,
        /// last weight and action leaves the reward unchanged, and the
        /// transition commutes with the flip.
        #[test]
        fn reward_and_transition_are_sign_symmetric(
            alpha in -5.0..5.0f64,
            lw in -5.0..5.0f64,
            w in -5.0..5.0f64,
            noise in -3.0..3.0f64,
        ) {
            let env = mono_env(0.9, 1.0, 1.0, 4.0);
            let s = State { alpha: vec![alpha], last_weight: lw, statics: vec![] };
            let flipped = State { alpha: vec![-alpha], last_weight: -lw, statics: vec![] };
            prop_assert_eq!(env.reward(&s, w), env.reward(&flipped, -w));
            let n1 = env.transition(&s, w, &[noise]);
            let n2 = env.transition(&flipped, -w, &[-noise]);
            prop_assert_eq!(-n1.alpha[0], n2.alpha[0]);
            prop_assert_eq!(-n1.last_weight, n2.last_weight);
        }
    }
}
