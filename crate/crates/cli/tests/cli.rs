//! End-to-end checks of the command-line contract: artifacts, determinism
//! and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn difftrade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_difftrade"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn tiny_train(out: &Path, seed: &str, extra: &[&str]) -> Output {
    let out_str = out.to_str().unwrap();
    let mut args = vec![
        "train",
        "--preset",
        "mono_l1",
        "--desk",
        "--seed",
        seed,
        "--out",
        out_str,
        "--total-samples",
        "2048",
        "--epochs",
        "1",
        "--hidden",
        "8,8",
        "--log-every",
        "0",
    ];
    args.extend_from_slice(extra);
    difftrade(&args)
}

#[test]
fn train_writes_checkpoint_curve_and_metadata() {
    let dir = tempdir().unwrap();
    let out = difftrade(&[
        "train",
        "--preset",
        "mono_l1",
        "--desk",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
        "--total-samples",
        "2048",
        "--epochs",
        "1",
        "--hidden",
        "8,8",
        "--log-every",
        "0",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("checkpoint.bin").exists());
    assert!(dir.path().join("training_curve.csv").exists());
    let meta = std::fs::read_to_string(dir.path().join("run_metadata.toml")).unwrap();
    // The desk schedule keeps the default horizon.
    assert!(meta.contains("horizon = 50"), "metadata:\n{meta}");
    assert!(meta.contains("seed = 7"));
    assert!(meta.contains("env_source = \"preset:mono_l1\""));
    let curve = std::fs::read_to_string(dir.path().join("training_curve.csv")).unwrap();
    assert!(curve.starts_with("batch_index,mean_cr,lr\n"));
    assert_eq!(curve.lines().count(), 3, "2 batches expected");
}

#[test]
fn unknown_preset_exits_one_with_the_preset_list() {
    let dir = tempdir().unwrap();
    let out = difftrade(&[
        "train",
        "--preset",
        "nope",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("mono_l1"), "stderr should list presets: {stderr}");
}

#[test]
fn identical_invocations_produce_byte_identical_checkpoints() {
    let dir_a = tempdir().unwrap();
    let dir_b = tempdir().unwrap();
    assert!(tiny_train(dir_a.path(), "3", &[]).status.success());
    assert!(tiny_train(dir_b.path(), "3", &[]).status.success());
    let a = std::fs::read(dir_a.path().join("checkpoint.bin")).unwrap();
    let b = std::fs::read(dir_b.path().join("checkpoint.bin")).unwrap();
    assert_eq!(a, b);

    let dir_c = tempdir().unwrap();
    assert!(tiny_train(dir_c.path(), "4", &[]).status.success());
    let c = std::fs::read(dir_c.path().join("checkpoint.bin")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn oracle_writes_bands_with_a_positive_width_at_zero_weight() {
    let dir = tempdir().unwrap();
    let out = difftrade(&[
        "oracle",
        "--preset",
        "mono_l1",
        "--out",
        dir.path().to_str().unwrap(),
        "--horizon",
        "20",
        "--n-alpha",
        "101",
        "--n-lw",
        "161",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let bands = std::fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    let zero_row = bands
        .lines()
        .find(|l| l.starts_with("0,"))
        .expect("lw=0 row present");
    let fields: Vec<&str> = zero_row.split(',').collect();
    let upper: f64 = fields[1].parse().unwrap();
    let lower: f64 = fields[2].parse().unwrap();
    assert!(upper > 0.3 && lower < -0.3, "band too narrow: {zero_row}");
    assert!(dir.path().join("dp_solution.csv").exists());
}

#[test]
fn oracle_rejects_two_scale_environments() {
    let dir = tempdir().unwrap();
    let out = difftrade(&[
        "oracle",
        "--preset",
        "twoscale_l1",
        "--out",
        dir.path().to_str().unwrap(),
        "--horizon",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn costless_one_step_oracle_has_an_empty_band() {
    let dir = tempdir().unwrap();
    let out = difftrade(&[
        "oracle",
        "--preset",
        "mono_l1",
        "--set",
        "cost.l1_spread=0",
        "--out",
        dir.path().to_str().unwrap(),
        "--horizon",
        "1",
        "--n-alpha",
        "101",
        "--n-lw",
        "161",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let bands = std::fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    for line in bands.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields[1].is_empty() || fields[2].is_empty() {
            continue;
        }
        let width: f64 = fields[1].parse::<f64>().unwrap() - fields[2].parse::<f64>().unwrap();
        // Edges are quantized to the oracle alpha grid (~0.18 spacing).
        assert!(width < 0.6, "band should collapse without costs: {line}");
    }
}

#[test]
fn probe_emits_the_requested_curve_family() {
    let train_dir = tempdir().unwrap();
    assert!(tiny_train(train_dir.path(), "5", &[]).status.success());
    let probe_dir = tempdir().unwrap();
    let out = difftrade(&[
        "probe",
        "--preset",
        "mono_l1",
        "--checkpoint",
        train_dir.path().join("checkpoint.bin").to_str().unwrap(),
        "--out",
        probe_dir.path().to_str().unwrap(),
        "--lw",
        "-4,-2,0,2,4",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let curves = std::fs::read_to_string(probe_dir.path().join("action_curves.csv")).unwrap();
    let mut lws: Vec<&str> = curves
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    lws.sort();
    lws.dedup();
    assert_eq!(lws.len(), 5, "expected 5 curves");
    assert!(probe_dir.path().join("myopic_target.csv").exists());
    assert!(probe_dir.path().join("bands.csv").exists());
}

#[test]
fn probe_rejects_a_mismatched_checkpoint() {
    let train_dir = tempdir().unwrap();
    assert!(tiny_train(train_dir.path(), "6", &[]).status.success());
    let probe_dir = tempdir().unwrap();
    // Checkpoint has 2 inputs; the two-scale environment needs 3.
    let out = difftrade(&[
        "probe",
        "--preset",
        "twoscale_l1",
        "--checkpoint",
        train_dir.path().join("checkpoint.bin").to_str().unwrap(),
        "--out",
        probe_dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn heatmap_probe_writes_three_region_rows() {
    let train_dir = tempdir().unwrap();
    let out = difftrade(&[
        "train",
        "--preset",
        "twoscale_l1",
        "--desk",
        "--seed",
        "2",
        "--out",
        train_dir.path().to_str().unwrap(),
        "--total-samples",
        "2048",
        "--epochs",
        "1",
        "--hidden",
        "8,8",
        "--log-every",
        "0",
    ]);
    assert!(out.status.success());
    let probe_dir = tempdir().unwrap();
    let out = difftrade(&[
        "probe",
        "--preset",
        "twoscale_l1",
        "--checkpoint",
        train_dir.path().join("checkpoint.bin").to_str().unwrap(),
        "--out",
        probe_dir.path().to_str().unwrap(),
        "--heatmap",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let heatmap = std::fs::read_to_string(probe_dir.path().join("heatmap.csv")).unwrap();
    assert!(heatmap.starts_with("slow,short_term,class,action\n"));
}

#[test]
fn simulate_is_seed_deterministic_and_flags_low_samples() {
    let train_dir = tempdir().unwrap();
    let out = difftrade(&[
        "train",
        "--preset",
        "twoscale_l1",
        "--desk",
        "--seed",
        "9",
        "--out",
        train_dir.path().to_str().unwrap(),
        "--total-samples",
        "2048",
        "--epochs",
        "1",
        "--hidden",
        "8,8",
        "--log-every",
        "0",
    ]);
    assert!(out.status.success());
    let ckpt = train_dir.path().join("checkpoint.bin");
    let run = |dir: &Path| {
        difftrade(&[
            "simulate",
            "--preset",
            "twoscale_l1",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
            "--steps",
            "300",
            "--burn-in",
            "100",
            "--seed",
            "11",
        ])
    };
    let sim_a = tempdir().unwrap();
    let sim_b = tempdir().unwrap();
    let out_a = run(sim_a.path());
    let out_b = run(sim_b.path());
    assert!(out_a.status.success());
    assert!(out_b.status.success());
    let stderr = String::from_utf8_lossy(&out_a.stderr);
    assert!(stderr.contains("small sample"), "expected low-sample warning: {stderr}");
    let a = std::fs::read_to_string(sim_a.path().join("trajectory.csv")).unwrap();
    let b = std::fs::read_to_string(sim_b.path().join("trajectory.csv")).unwrap();
    assert_eq!(a, b);
    assert!(sim_a.path().join("correlations.csv").exists());
}

#[test]
fn compare_fails_tolerances_for_an_untrained_policy() {
    let train_dir = tempdir().unwrap();
    assert!(tiny_train(train_dir.path(), "8", &[]).status.success());
    let oracle_dir = tempdir().unwrap();
    let out = difftrade(&[
        "oracle",
        "--preset",
        "mono_l1",
        "--out",
        oracle_dir.path().to_str().unwrap(),
        "--horizon",
        "20",
        "--n-alpha",
        "101",
        "--n-lw",
        "161",
    ]);
    assert!(out.status.success());
    let out = difftrade(&[
        "compare",
        "--preset",
        "mono_l1",
        "--checkpoint",
        train_dir.path().join("checkpoint.bin").to_str().unwrap(),
        "--dp",
        oracle_dir.path().join("dp_solution.csv").to_str().unwrap(),
        "--sim-steps",
        "20000",
        "--burn-in",
        "500",
    ]);
    assert_eq!(out.status.code(), Some(3), "stdout: {}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn compare_exits_one_when_the_oracle_file_is_missing() {
    let train_dir = tempdir().unwrap();
    assert!(tiny_train(train_dir.path(), "10", &[]).status.success());
    let out = difftrade(&[
        "compare",
        "--preset",
        "mono_l1",
        "--checkpoint",
        train_dir.path().join("checkpoint.bin").to_str().unwrap(),
        "--dp",
        "/nonexistent/dp.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn set_overrides_reject_malformed_input() {
    let dir = tempdir().unwrap();
    let out = difftrade(&[
        "train",
        "--preset",
        "mono_l1",
        "--set",
        "no_equals_sign",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
