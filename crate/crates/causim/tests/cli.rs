//! End-to-end checks of the causim binary against the shipped experiment
//! files.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causim"))
}

fn experiments() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("experiments")
}

#[test]
fn shipped_files_validate_clean() {
    for name in [
        "gamma_u_arms.toml",
        "gamma_x_arms.toml",
        "gamma_u_fine_sweep.toml",
        "calibrate_absorption.toml",
        "mean_function_original.toml",
        "mean_function_fixed_signal.toml",
    ] {
        let out = bin()
            .arg("validate")
            .arg(experiments().join(name))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{name}: {}{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn infeasible_arm_fails_validation_with_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(experiments().join("gamma_u_arms.toml"))
        .unwrap()
        .replace("value = 0.55", "value = 0.9");
    std::fs::write(&path, text).unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("0.8"),
        "diagnostic should cite the bound: {stderr}"
    );
    assert!(
        stderr.contains("arms[2]"),
        "diagnostic should be anchored: {stderr}"
    );
}

#[test]
fn missing_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noseed.toml");
    let text = std::fs::read_to_string(experiments().join("gamma_u_fine_sweep.toml"))
        .unwrap()
        .replace("seed = 20240713\n", "");
    std::fs::write(&path, text).unwrap();
    let out = bin().arg("validate").arg(&path).output().unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed"), "{stderr}");
}

#[test]
fn sweep_run_emits_the_documented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("sweep")
        .arg(experiments().join("gamma_u_fine_sweep.toml"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    for label in ["gamma_u_total", "gamma_u_direct"] {
        let csv = std::fs::read_to_string(out_dir.join(format!("sweep_{label}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "value,mean_bhat_x,se_bhat_x,mean_bhat_naive,se_bhat_naive,mean_add_abs_bias,se_add_abs_bias"
        );
        assert_eq!(lines.count(), 201);
    }
    assert!(out_dir.join("summary.txt").exists());
}

#[test]
fn run_with_fast_profile_caps_replications() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(experiments().join("gamma_u_arms.toml"))
        .arg("--profile")
        .arg("fast")
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("replications = 500"), "{stdout}");
    // even at reduced scale the three arms order correctly
    let csv = std::fs::read_to_string(out_dir.join("experiment.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    let mean_bx: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(
        mean_bx[0] < mean_bx[1] && mean_bx[1] < mean_bx[2],
        "{mean_bx:?}"
    );
}

#[test]
fn explain_classifies_the_three_pathways() {
    let out = bin()
        .arg("explain")
        .arg(experiments().join("gamma_u_arms.toml"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1 direct, 2 indirect"), "{stdout}");
    assert!(stdout.contains("blocking sets"), "{stdout}");

    // the gamma_x file mirrors the gamma_u report with roles swapped
    let out = bin()
        .arg("explain")
        .arg(experiments().join("gamma_x_arms.toml"))
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gamma_x -> outcome"), "{stdout}");
    assert!(stdout.contains("1 direct, 2 indirect"), "{stdout}");

    // a single pathway for the sample size
    let out = bin()
        .arg("explain")
        .arg(experiments().join("gamma_u_arms.toml"))
        .arg("--node")
        .arg("n")
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("1 direct, 0 indirect"), "{stdout}");
}
