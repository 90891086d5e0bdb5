//! Environment configuration files (TOML) and the named presets used across
//! the experiments.

use sha2::{Digest, Sha256};

use super::{
    AlphaModel, CostSpec, EnvSpec, MaxWeight, RiskSpec, StaticParam, StaticParamDecl,
};
use crate::error::{Error, Result};

/// Parse an environment from TOML text and validate it.
///
/// ```toml
/// [alpha]
/// kind = "mono"
/// rho = 0.9
/// sigma = 1.0
///
/// [risk]
/// l2_lambda = 1.0
/// max_weight = { m = 3.0, k = 10.0 }
///
/// [cost]
/// l1_spread = 4.0
///
/// [[statics]]
/// name = "sigma"
/// lo = 0.0
/// hi = 4.0
/// ```
pub fn from_toml_str(text: &str) -> Result<EnvSpec> {
    let env: EnvSpec =
        toml::from_str(text).map_err(|e| Error::Config(format!("environment file: {e}")))?;
    env.validate()?;
    Ok(env)
}

/// Canonical TOML serialization (field order is fixed by the type).
pub fn to_toml_string(env: &EnvSpec) -> String {
    toml::to_string(env).expect("environment always serializes")
}

/// Hex digest of the canonical serialization; stored in checkpoints and run
/// metadata so artifacts can be matched to the environment that made them.
pub fn content_hash(env: &EnvSpec) -> String {
    let text = to_toml_string(env);
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(digest.len() * 2);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

pub fn preset_names() -> &'static [&'static str] {
    &["mono_l1", "mono_maxw", "mono_varsigma", "twoscale_l1", "twoscale_varspread"]
}

/// The five named environments studied by the experiments.
pub fn preset(name: &str) -> Option<EnvSpec> {
    let mono = AlphaModel::Mono { rho: 0.9, sigma: 1.0 };
    let two_scale =
        AlphaModel::TwoScale { rho_s: 0.9, sigma_s: 1.0, rho_f: 0.0, sigma_f: 3.0 };
    let l2_risk = RiskSpec { l2_lambda: 1.0, max_weight: None };
    let spread4 = CostSpec { l1_spread: 4.0, l2_coeff: 0.0 };
    let spec = match name {
        "mono_l1" => EnvSpec {
            alpha: mono,
            risk: l2_risk,
            cost: spread4,
            statics: vec![],
            lw_init_range: [-6.0, 6.0],
        },
        "mono_maxw" => EnvSpec {
            alpha: mono,
            risk: RiskSpec {
                l2_lambda: 0.0,
                max_weight: Some(MaxWeight { m: 3.0, k: 10.0 }),
            },
            cost: spread4,
            statics: vec![],
            lw_init_range: [-6.0, 6.0],
        },
        "mono_varsigma" => EnvSpec {
            alpha: mono,
            risk: l2_risk,
            cost: spread4,
            statics: vec![StaticParamDecl { name: StaticParam::Sigma, lo: 0.0, hi: 4.0 }],
            lw_init_range: [-6.0, 6.0],
        },
        "twoscale_l1" => EnvSpec {
            alpha: two_scale,
            risk: l2_risk,
            cost: spread4,
            statics: vec![],
            lw_init_range: [-6.0, 6.0],
        },
        "twoscale_varspread" => EnvSpec {
            alpha: two_scale,
            risk: l2_risk,
            cost: spread4,
            statics: vec![StaticParamDecl {
                name: StaticParam::L1Spread,
                lo: 0.0,
                hi: 6.0,
            }],
            lw_init_range: [-6.0, 6.0],
        },
        _ => return None,
    };
    debug_assert!(spec.validate().is_ok());
    Some(spec)
}
