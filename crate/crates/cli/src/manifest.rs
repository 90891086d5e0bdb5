//! Resolving run inputs (preset or file plus `--set` overrides) and writing
//! the metadata that makes a run reproducible.

use std::path::{Path, PathBuf};

use difftrade_core::env::{self, EnvSpec};
use difftrade_core::train::TrainConfig;
use difftrade_core::Error;

use crate::CliError;

/// Where the environment came from, for the metadata record.
pub struct ResolvedEnv {
    pub env: EnvSpec,
    pub source: String,
    pub hash: String,
}

/// Load the environment from a preset name or a TOML file, then apply
/// `--set section.key=value` overrides and re-validate.
pub fn resolve_env(
    preset: Option<&str>,
    env_path: Option<&Path>,
    sets: &[String],
) -> Result<ResolvedEnv, CliError> {
    let (text, source) = match (preset, env_path) {
        (Some(name), None) => {
            let spec = env::preset(name).ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset `{name}`; available: {}",
                    env::preset_names().join(", ")
                ))
            })?;
            (env::to_toml_string(&spec), format!("preset:{name}"))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(Error::Io)?;
            (text, format!("file:{}", path.display()))
        }
        _ => {
            return Err(Error::Config(
                "exactly one of --preset or --env is required".into(),
            )
            .into())
        }
    };
    let text = apply_sets(&text, sets)?;
    let spec = env::from_toml_str(&text)?;
    let hash = env::content_hash(&spec);
    Ok(ResolvedEnv { env: spec, source, hash })
}

/// Apply dotted-path overrides to a TOML document.
fn apply_sets(text: &str, sets: &[String]) -> Result<String, CliError> {
    if sets.is_empty() {
        return Ok(text.to_string());
    }
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e| Error::Config(format!("environment file: {e}")))?;
    for set in sets {
        let (path, raw) = set.split_once('=').ok_or_else(|| {
            Error::Config(format!("--set expects section.key=value, got `{set}`"))
        })?;
        let value = parse_toml_value(raw.trim())?;
        let mut keys: Vec<&str> = path.trim().split('.').collect();
        let last = keys.pop().ok_or_else(|| {
            Error::Config(format!("--set has an empty key path in `{set}`"))
        })?;
        let mut table = &mut doc;
        for key in keys {
            table = table
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| {
                    Error::Config(format!("--set cannot traverse non-table key `{key}`"))
                })?;
        }
        table.insert(last.to_string(), value);
    }
    Ok(toml::to_string(&doc).expect("tables always serialize"))
}

fn parse_toml_value(raw: &str) -> Result<toml::Value, CliError> {
    let wrapped = format!("value = {raw}");
    if let Ok(table) = wrapped.parse::<toml::Table>() {
        if let Some(v) = table.get("value") {
            return Ok(v.clone());
        }
    }
    // Fall back to a plain string value.
    Ok(toml::Value::String(raw.to_string()))
}

#[derive(serde::Serialize)]
struct RunSection<'a> {
    command: &'a str,
    seed: u64,
    env_source: &'a str,
    env_hash: &'a str,
    crate_version: &'a str,
    threads: usize,
}

/// Write `run_metadata.toml`: everything needed to reproduce the run.
pub fn write_metadata(
    out_dir: &Path,
    command: &str,
    resolved: &ResolvedEnv,
    seed: u64,
    train: Option<&TrainConfig>,
) -> Result<PathBuf, CliError> {
    #[derive(serde::Serialize)]
    struct Metadata<'a> {
        run: RunSection<'a>,
        #[serde(skip_serializing_if = "Option::is_none")]
        train: Option<&'a TrainConfig>,
        env: &'a EnvSpec,
    }
    let meta = Metadata {
        run: RunSection {
            command,
            seed,
            env_source: &resolved.source,
            env_hash: &resolved.hash,
            crate_version: env!("CARGO_PKG_VERSION"),
            threads: rayon::current_num_threads(),
        },
        train,
        env: &resolved.env,
    };
    let text = toml::to_string(&meta).expect("metadata always serializes");
    let path = out_dir.join("run_metadata.toml");
    std::fs::write(&path, text).map_err(Error::Io)?;
    Ok(path)
}

/// Parse a comma-separated list of floats (for `--lw` and friends).
pub fn parse_float_list(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{s}` in list")).into())
        })
        .collect()
}
