//! End-to-end checks of the installed binary: every subcommand is driven
//! through a real subprocess, exactly as a user would call it.

use std::path::Path;
use std::process::{Command, Output};

fn zenplan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zenplan"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        stdout(out),
        stderr(out)
    );
}

#[test]
fn synth_then_cluster_writes_representatives_and_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let out = zenplan(
        &["synth", "--seed", "11", "--hours", "240", "--buildings", "1", "--out", "data.csv"],
        dir.path(),
    );
    assert_ok(&out);
    assert!(dir.path().join("data.csv").exists());

    let out = zenplan(
        &["cluster", "--data", "data.csv", "--k", "5", "--heuristic", "--out-dir", "."],
        dir.path(),
    );
    assert_ok(&out);
    let assignment = std::fs::read_to_string(dir.path().join("assignment.csv")).unwrap();
    assert_eq!(assignment.lines().count(), 11, "header plus one row per day");
    let representatives = std::fs::read_to_string(dir.path().join("representatives.csv")).unwrap();
    assert_eq!(representatives.lines().count(), 6, "header plus one row per cluster");
}

#[test]
fn sweep_expands_range_syntax() {
    let dir = tempfile::tempdir().unwrap();
    assert_ok(&zenplan(
        &["synth", "--hours", "240", "--buildings", "1", "--out", "data.csv"],
        dir.path(),
    ));
    // 4:8:2 → K ∈ {4, 6, 8}; 1 building → 7 series
    let out = zenplan(&["sweep", "--data", "data.csv", "--k", "4:8:2"], dir.path());
    assert_ok(&out);
    let sweep = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3 * 7);
    let elbow = dir.path().join("plotdata").join("elbow_day_kmeans_range.csv");
    assert_eq!(std::fs::read_to_string(elbow).unwrap().lines().count(), 1 + 3);
}

#[test]
fn build_rejects_m0_on_hour_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let out = zenplan(
        &[
            "build",
            "--synth",
            "11:240:1",
            "--granularity",
            "hour",
            "--k",
            "24",
            "--variant",
            "M0",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("M0"), "diagnostic names the variant: {err}");
    assert!(!dir.path().join("model.mps").exists());
}

#[test]
fn solve_with_no_embedded_exports_without_solving() {
    let dir = tempfile::tempdir().unwrap();
    let out = zenplan(
        &[
            "solve",
            "--synth",
            "11:240:1",
            "--k",
            "4",
            "--variant",
            "M0",
            "--simplified",
            "--export",
            "model.mps",
            "--no-embedded",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("solve skipped"), "{text}");
    assert!(!text.contains("status:"), "{text}");
    let mps = std::fs::read_to_string(dir.path().join("model.mps")).unwrap();
    assert!(mps.starts_with("NAME"), "MPS written: {}", &mps[..40]);

    // without --export there is nothing to do
    let out = zenplan(
        &["solve", "--synth", "11:96:1", "--k", "3", "--variant", "M0", "--no-embedded"],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--export"));
}

#[test]
fn solve_reports_status_and_writes_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = zenplan(
        &[
            "solve",
            "--synth",
            "11:96:1",
            "--k",
            "4",
            "--variant",
            "M0",
            "--simplified",
            "--write-solution",
            "values.csv",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("status: optimal"), "{text}");
    assert!(text.contains("objective: "), "{text}");
    let values = std::fs::read_to_string(dir.path().join("values.csv")).unwrap();
    assert!(values.starts_with("variable,value\n"));
    assert!(values.lines().count() > 10);
}

#[test]
fn cluster_without_k_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = zenplan(&["cluster", "--synth", "11:96:1"], dir.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("--k"), "{}", stderr(&out));
}

#[test]
fn experiment_reruns_match_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "[data.synth]\n\
         seed = 11\n\
         hours = 240\n\
         buildings = 1\n\
         \n\
         [grid]\n\
         granularities = [\"day\"]\n\
         algorithms = [\"kmeans\"]\n\
         normalizations = [\"range\"]\n\
         k_days = [4, 10]\n",
    )
    .unwrap();
    for out_dir in ["first", "second"] {
        let out = zenplan(
            &["experiment", "--config", "exp.toml", "--out-dir", out_dir],
            dir.path(),
        );
        assert_ok(&out);
        let text = stdout(&out);
        assert!(text.contains("reference M0 (identity-days)"), "{text}");
        assert!(text.contains("cells: 2 solved, 0 failed"), "{text}");
    }
    for file in ["deviation.csv", "cells.csv", "references.csv", "config.txt"] {
        let first = std::fs::read(dir.path().join("first").join(file)).unwrap();
        let second = std::fs::read(dir.path().join("second").join(file)).unwrap();
        assert_eq!(first, second, "{file} differs between reruns");
    }
    // K = N cell reproduces the reference within solver noise
    let deviation = std::fs::read_to_string(dir.path().join("first/deviation.csv")).unwrap();
    let row: Vec<&str> = deviation.lines().nth(1).unwrap().split(',').collect();
    let k10: f64 = row[5].parse().unwrap();
    assert!(k10.abs() < 1e-3, "K = N deviation {k10}%");
}
