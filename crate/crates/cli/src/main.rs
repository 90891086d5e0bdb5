//! Command-line entry point tying configuration, training, the grid oracle
//! and analysis into reproducible runs.
//!
//! Exit codes are a stable contract: 0 success, 1 usage/config error,
//! 2 numeric failure, 3 tolerance failure (for `compare`).

mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use difftrade_core::analysis::{
    correlation_matrix, extract_bands, no_trade_heatmap, probe_action_curve,
    simulate_trajectory, write_action_curves_csv, write_bands_csv, write_correlations_csv,
    write_heatmap_csv, write_myopic_target_csv, write_trajectory_csv, CurveSpec,
};
use difftrade_core::env::{AlphaModel, EnvSpec};
use difftrade_core::oracle::{compare_policy, dp_solve, CompareOptions, DpSolution, GridSpec};
use difftrade_core::policy::{load_checkpoint, save_checkpoint, Architecture, CheckpointMeta};
use difftrade_core::train::{train, TrainConfig};
use difftrade_core::Error;

use manifest::{parse_float_list, resolve_env, write_metadata, ResolvedEnv};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Tolerance(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Numeric(_)) => 2,
            CliError::Core(_) => 1,
            CliError::Tolerance(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Tolerance(msg) => format!("tolerance failure: {msg}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "difftrade", version, about = "Trading policies by differentiating simulated rollouts")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EnvArgs {
    /// Named environment preset (see `--preset help` output on error)
    #[arg(long, conflicts_with = "env")]
    preset: Option<String>,

    /// Environment configuration file (TOML)
    #[arg(long)]
    env: Option<PathBuf>,

    /// Override an environment key, e.g. `--set cost.l1_spread=0`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl EnvArgs {
    fn resolve(&self) -> Result<ResolvedEnv, CliError> {
        resolve_env(self.preset.as_deref(), self.env.as_deref(), &self.sets)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write checkpoint, training curve and metadata
    Train {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Desk-scale budget (500k samples, 5 epochs) instead of paper scale
        #[arg(long)]
        desk: bool,
        /// Rollout horizon T
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        total_samples: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Hidden layer widths, comma separated
        #[arg(long, default_value = "300,300")]
        hidden: String,
        /// Progress line every N batches (0 = silent)
        #[arg(long, default_value_t = 50)]
        log_every: usize,
    },

    /// Solve the dynamic-programming oracle and export its grids and bands
    Oracle {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, default_value_t = 201)]
        n_alpha: usize,
        #[arg(long, default_value_t = 321)]
        n_lw: usize,
        #[arg(long, default_value_t = 21)]
        gh_nodes: usize,
        #[arg(long, default_value_t = 4.0)]
        alpha_stds: f64,
        #[arg(long, default_value_t = 8.0)]
        lw_halfwidth: f64,
        /// Last weights at which band edges are printed
        #[arg(long, default_value = "-4,-3,-2,-1,0,1,2,3,4", allow_hyphen_values = true)]
        lw: String,
    },

    /// Probe a trained checkpoint: action curves, bands and heat-maps
    Probe {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Last weights for the curve family
        #[arg(long, default_value = "-4,-2,0,2,4", allow_hyphen_values = true)]
        lw: String,
        #[arg(long, default_value_t = 8.0)]
        alpha_halfwidth: f64,
        #[arg(long, default_value_t = 161)]
        alpha_points: usize,
        /// Fast alpha held fixed while sweeping the slow axis (two-scale)
        #[arg(long, default_value_t = 0.0)]
        fast_alpha: f64,
        /// Values for lifted static features, comma separated (default:
        /// midpoint of each declared range)
        #[arg(long, allow_hyphen_values = true)]
        statics: Option<String>,
        /// Trade threshold for band and region classification
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
        /// Also write the (slow, short-term) heat-map (two-scale only)
        #[arg(long)]
        heatmap: bool,
        #[arg(long, default_value_t = 0.0)]
        heatmap_lw: f64,
        #[arg(long, default_value_t = 9.0)]
        heatmap_halfwidth: f64,
        #[arg(long, default_value_t = 37)]
        heatmap_points: usize,
    },

    /// Simulate a checkpoint and write the trajectory and correlations
    Simulate {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Compare a checkpoint against an exported oracle solution
    Compare {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Oracle solution CSV written by the `oracle` subcommand
        #[arg(long)]
        dp: PathBuf,
        #[arg(long, default_value_t = 0.97)]
        min_ratio: f64,
        #[arg(long, default_value_t = 0.15)]
        max_rms: f64,
        #[arg(long, default_value_t = 100_000)]
        sim_steps: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train {
            env,
            out,
            seed,
            desk,
            horizon,
            epochs,
            total_samples,
            batch_size,
            lr,
            hidden,
            log_every,
        } => cmd_train(
            env,
            out,
            seed,
            desk,
            horizon,
            epochs,
            total_samples,
            batch_size,
            lr,
            &hidden,
            log_every,
        ),
        Command::Oracle {
            env,
            out,
            horizon,
            n_alpha,
            n_lw,
            gh_nodes,
            alpha_stds,
            lw_halfwidth,
            lw,
        } => cmd_oracle(env, out, horizon, n_alpha, n_lw, gh_nodes, alpha_stds, lw_halfwidth, &lw),
        Command::Probe {
            env,
            checkpoint,
            out,
            lw,
            alpha_halfwidth,
            alpha_points,
            fast_alpha,
            statics,
            eps,
            heatmap,
            heatmap_lw,
            heatmap_halfwidth,
            heatmap_points,
        } => cmd_probe(
            env,
            checkpoint,
            out,
            &lw,
            alpha_halfwidth,
            alpha_points,
            fast_alpha,
            statics.as_deref(),
            eps,
            heatmap,
            heatmap_lw,
            heatmap_halfwidth,
            heatmap_points,
        ),
        Command::Simulate { env, checkpoint, out, steps, burn_in, seed } => {
            cmd_simulate(env, checkpoint, out, steps, burn_in, seed)
        }
        Command::Compare {
            env,
            checkpoint,
            dp,
            min_ratio,
            max_rms,
            sim_steps,
            burn_in,
            seed,
        } => cmd_compare(env, checkpoint, dp, min_ratio, max_rms, sim_steps, burn_in, seed),
    }
}

fn parse_usize_list(raw: &str) -> Result<Vec<usize>, CliError> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad integer `{s}` in list")).into())
        })
        .collect()
}

/// Load a checkpoint and verify it matches the environment's feature count.
fn load_matching_checkpoint(
    path: &PathBuf,
    env: &EnvSpec,
    env_hash: &str,
) -> Result<(difftrade_core::policy::PolicyParams, CheckpointMeta), CliError> {
    let (params, meta) = load_checkpoint(path)?;
    if params.arch().input_dim != env.feature_count() {
        return Err(Error::Usage(format!(
            "checkpoint takes {} inputs but the environment has {} features",
            params.arch().input_dim,
            env.feature_count()
        ))
        .into());
    }
    if meta.env_hash != env_hash {
        eprintln!(
            "warning: checkpoint was trained on a different environment \
             (hash {} vs {env_hash})",
            meta.env_hash
        );
    }
    Ok((params, meta))
}

fn default_statics(env: &EnvSpec) -> Vec<f64> {
    env.statics.iter().map(|d| 0.5 * (d.lo + d.hi)).collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    env_args: EnvArgs,
    out: PathBuf,
    seed: u64,
    desk: bool,
    horizon: Option<usize>,
    epochs: Option<usize>,
    total_samples: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    hidden: &str,
    log_every: usize,
) -> Result<(), CliError> {
    let resolved = env_args.resolve()?;
    let mut config = if desk { TrainConfig::desk(seed) } else { TrainConfig::paper(seed) };
    if let Some(t) = horizon {
        config.horizon = t;
    }
    if let Some(e) = epochs {
        config.epochs = e;
    }
    if let Some(n) = total_samples {
        config.total_samples = n;
    }
    if let Some(b) = batch_size {
        config.batch_size = b;
    }
    if let Some(lr) = lr {
        config.lr = lr;
    }
    config.log_every = log_every;

    let hidden = parse_usize_list(hidden)?;
    let arch = Architecture::new(resolved.env.feature_count(), hidden)?;
    std::fs::create_dir_all(&out).map_err(Error::Io)?;

    let started = std::time::Instant::now();
    let (params, curve) = train(&resolved.env, &arch, &config)?;
    let elapsed = started.elapsed().as_secs_f64();

    let ckpt_path = out.join("checkpoint.bin");
    save_checkpoint(
        &ckpt_path,
        &params,
        &CheckpointMeta {
            env_hash: resolved.hash.clone(),
            seed,
            epochs: config.epochs as u32,
        },
    )?;
    curve.write_csv(&out.join("training_curve.csv"))?;
    write_metadata(&out, "train", &resolved, seed, Some(&config))?;
    let final_cr = curve.points.last().map(|p| p.mean_cr).unwrap_or_default();
    println!(
        "trained {} for {} epochs in {elapsed:.1}s; final batch mean reward {final_cr:.6}; \
         checkpoint at {}",
        resolved.source,
        config.epochs,
        ckpt_path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_oracle(
    env_args: EnvArgs,
    out: PathBuf,
    horizon: usize,
    n_alpha: usize,
    n_lw: usize,
    gh_nodes: usize,
    alpha_stds: f64,
    lw_halfwidth: f64,
    lw_list: &str,
) -> Result<(), CliError> {
    let resolved = env_args.resolve()?;
    let grid = GridSpec {
        alpha_halfwidth_stds: alpha_stds,
        n_alpha,
        lw_halfwidth,
        n_lw,
        gh_nodes,
    };
    let dp = dp_solve(&resolved.env, &grid, horizon)?;
    std::fs::create_dir_all(&out).map_err(Error::Io)?;
    dp.save_csv(&out.join("dp_solution.csv"))?;

    let lw_values = parse_float_list(lw_list)?;
    let action = |alpha: f64, lw: f64| dp.action_at(alpha, lw);
    let report = extract_bands(&action, &lw_values, &dp.alpha_grid, 1e-2);
    write_bands_csv(&out.join("bands.csv"), &report)?;
    write_metadata(&out, "oracle", &resolved, 0, None)?;
    for row in &report.rows {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!("lw {:+.2}: upper {} lower {}", row.lw, fmt(row.upper), fmt(row.lower));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_probe(
    env_args: EnvArgs,
    checkpoint: PathBuf,
    out: PathBuf,
    lw_list: &str,
    alpha_halfwidth: f64,
    alpha_points: usize,
    fast_alpha: f64,
    statics: Option<&str>,
    eps: f64,
    heatmap: bool,
    heatmap_lw: f64,
    heatmap_halfwidth: f64,
    heatmap_points: usize,
) -> Result<(), CliError> {
    let resolved = env_args.resolve()?;
    let (params, _) = load_matching_checkpoint(&checkpoint, &resolved.env, &resolved.hash)?;
    let statics = match statics {
        Some(raw) => parse_float_list(raw)?,
        None => default_statics(&resolved.env),
    };
    let lw_values = parse_float_list(lw_list)?;
    let alpha_grid = axis(alpha_halfwidth, alpha_points);

    std::fs::create_dir_all(&out).map_err(Error::Io)?;
    let spec = CurveSpec {
        alpha_grid: alpha_grid.clone(),
        lw_values: lw_values.clone(),
        fast_alpha,
        statics: statics.clone(),
    };
    let curves = probe_action_curve(&params, &resolved.env, &spec)?;
    write_action_curves_csv(&out.join("action_curves.csv"), &curves)?;
    if let Some(myopic) = &curves.myopic {
        write_myopic_target_csv(&out.join("myopic_target.csv"), myopic)?;
    }

    let env_ref = &resolved.env;
    let params_ref = &params;
    let statics_ref = &statics;
    let action = move |alpha: f64, lw: f64| {
        let features = match env_ref.alpha {
            AlphaModel::Mono { .. } => env_ref.features_from_parts(&[alpha], lw, statics_ref),
            AlphaModel::TwoScale { .. } => {
                env_ref.features_from_parts(&[alpha, fast_alpha], lw, statics_ref)
            }
        };
        params_ref.forward(&features)
    };
    let report = extract_bands(&action, &lw_values, &alpha_grid, eps);
    write_bands_csv(&out.join("bands.csv"), &report)?;

    if heatmap {
        let slow_axis = axis(heatmap_halfwidth, heatmap_points);
        let short_axis = axis(heatmap_halfwidth, heatmap_points);
        let map = no_trade_heatmap(
            &params,
            &resolved.env,
            heatmap_lw,
            &statics,
            &slow_axis,
            &short_axis,
            eps,
        )?;
        write_heatmap_csv(&out.join("heatmap.csv"), &map)?;
    }
    write_metadata(&out, "probe", &resolved, 0, None)?;
    println!(
        "probed {} lw values over alpha in ±{alpha_halfwidth}; results in {}",
        lw_values.len(),
        out.display()
    );
    Ok(())
}

fn axis(halfwidth: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| -halfwidth + 2.0 * halfwidth * i as f64 / (points - 1) as f64)
        .collect()
}

fn cmd_simulate(
    env_args: EnvArgs,
    checkpoint: PathBuf,
    out: PathBuf,
    steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<(), CliError> {
    let resolved = env_args.resolve()?;
    let (params, _) = load_matching_checkpoint(&checkpoint, &resolved.env, &resolved.hash)?;
    std::fs::create_dir_all(&out).map_err(Error::Io)?;
    let traj = simulate_trajectory(&params, &resolved.env, steps, burn_in, seed)?;
    write_trajectory_csv(&out.join("trajectory.csv"), &traj)?;
    let mean_reward =
        traj.steps.iter().map(|s| s.reward).sum::<f64>() / traj.steps.len() as f64;
    if resolved.env.alpha.components() == 2 {
        let corr = correlation_matrix(&traj)?;
        if corr.low_sample {
            eprintln!(
                "warning: {} steps is a small sample for correlation estimates",
                traj.steps.len()
            );
        }
        write_correlations_csv(&out.join("correlations.csv"), &corr)?;
    }
    write_metadata(&out, "simulate", &resolved, seed, None)?;
    println!(
        "simulated {} steps (burn-in {burn_in}); mean reward {mean_reward:.6}; results in {}",
        traj.steps.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_compare(
    env_args: EnvArgs,
    checkpoint: PathBuf,
    dp_path: PathBuf,
    min_ratio: f64,
    max_rms: f64,
    sim_steps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<(), CliError> {
    let resolved = env_args.resolve()?;
    let (params, _) = load_matching_checkpoint(&checkpoint, &resolved.env, &resolved.hash)?;
    let dp = DpSolution::load_csv(&dp_path)?;
    let opts = CompareOptions { sim_steps, burn_in, seed, ..Default::default() };
    let report = compare_policy(&params, &dp, &resolved.env, &opts)?;
    println!(
        "action rms {:.4} over {} probe points; policy reward {:.6} (se {:.6}); \
         oracle reward {:.6} (se {:.6}); ratio {:.4}",
        report.action_rms,
        report.probe_points,
        report.policy_reward,
        report.policy_stderr,
        report.oracle_reward,
        report.oracle_stderr,
        report.reward_ratio
    );
    if report.reward_ratio < min_ratio {
        return Err(CliError::Tolerance(format!(
            "reward ratio {:.4} below the required {min_ratio}",
            report.reward_ratio
        )));
    }
    if report.action_rms > max_rms {
        return Err(CliError::Tolerance(format!(
            "action rms {:.4} above the allowed {max_rms}",
            report.action_rms
        )));
    }
    println!("within tolerances (ratio >= {min_ratio}, rms <= {max_rms})");
    Ok(())
}
