//! The `tsp` binary: exit codes, diagnostics and report files.

use std::process::{Command, Output};

fn tsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scenario_file(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn psi_prints_csv() {
    let o = tsp(&["kernels", "psi", "--xi", "0"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("d,alpha,xi,value,est_error"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[3].parse::<f64>().unwrap(), 0.0);

    let o = tsp(&["kernels", "psi", "--d", "3", "--alpha", "1.5", "--xi", "2"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!(v > 0.0 && v.is_finite());
}

#[test]
fn kernel_argument_errors_exit_with_two() {
    let o = tsp(&["kernels", "psi", "--alpha", "2.5", "--xi", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"));
    let o = tsp(&["kernels", "poisson", "--x", "0,0", "--z", "0.5,0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tsp(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn constants_and_exit_time() {
    let o = tsp(&["kernels", "constants"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().count() >= 2);
    let o = tsp(&["kernels", "exit-time", "--radius", "0.5", "--x", "0,0"]);
    assert!(o.status.success());
    let v: f64 = stdout(&o).lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    // Γ(1) / (2 Γ(3/2)²) · 0.5
    let want = 0.5 / (2.0 * std::f64::consts::PI / 4.0);
    assert!((v - want).abs() < 1e-7 * want);
}

#[test]
fn missing_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(
        &dir,
        "s.json",
        r#"{"name": "g1", "params": {"d": 2, "alpha": 1.0}, "estimate": {"n": 10}, "experiment": {}}"#,
    );
    let o = tsp(&["run", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sim"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(
        &dir,
        "s.json",
        r#"{"name": "g1", "params": {"d": 2, "alpha": 1.0}, "sim": {"epsilon": 0.01, "h": 0.001},
            "estimate": {"n": 10}, "experiment": {"radius_factor": [0.5]}}"#,
    );
    let o = tsp(&["run", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("radius_factor"), "{}", stderr(&o));

    let o = tsp(&["verify", "bhp_local"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tsp(&["verify", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_prints_one_row_per_path() {
    let o = tsp(&[
        "--seed", "3", "simulate", "--domain", r#"{"type": "ball", "center": [0, 0], "radius": 0.2}"#, "--start", "0,0",
        "--epsilon", "0.01", "--h", "0.001", "--paths", "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
    let again = tsp(&[
        "--seed", "3", "simulate", "--domain", r#"{"type": "ball", "center": [0, 0], "radius": 0.2}"#, "--start", "0,0",
        "--epsilon", "0.01", "--h", "0.001", "--paths", "5",
    ]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn small_green_scenario_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario_file(
        &dir,
        "g1.json",
        r#"{"name": "g1", "params": {"d": 2, "alpha": 1.0},
            "sim": {"epsilon": 0.00125, "h": 0.001, "boundary_refine": true, "seed": 5},
            "estimate": {"n": 4000},
            "experiment": {"radius_factors": [0.5], "cells_per_axis": 12, "margin_cells": 1, "gates": false}}"#,
    );
    let json_out = dir.path().join("report.json");
    let o = tsp(&["--out", json_out.to_str().unwrap(), "run", &path]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_out).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    let cells = checks.iter().filter(|c| c["check_id"].as_str().unwrap().contains("cell")).count();
    assert!(cells >= 8, "{cells} per-cell checks");
    assert_eq!(report["passed"].as_bool().unwrap(), o.status.code() == Some(0));

    let csv_out = dir.path().join("report.csv");
    let o = tsp(&["--format", "csv", "--out", csv_out.to_str().unwrap(), "run", &path]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let csv = std::fs::read_to_string(&csv_out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("check_id,lhs,rhs,tolerance,pass"));
    assert_eq!(lines.count(), checks.len());
}
