//! Scenario runs: falsification, seed overrides and reproducible reports.

use tsp::verify::{run_scenario, Experiment, Report, Scenario, Statement};

fn small_g1(extra: &str) -> Scenario {
    Scenario::from_json(&format!(
        r#"{{"name": "g1", "params": {{"d": 2, "alpha": 1.0}},
            "sim": {{"epsilon": 0.00125, "h": 0.001, "boundary_refine": true, "seed": 11}},
            "estimate": {{"n": 20000}},
            "experiment": {{"radius_factors": [0.5], "cells_per_axis": 12, "margin_cells": 1, "gates": false{extra}}}}}"#
    ))
    .unwrap()
}

fn failing(r: &Report, suffix: &str) -> usize {
    r.failures().filter(|c| c.check_id.ends_with(suffix)).count()
}

#[test]
fn a_false_upper_bound_is_rejected() {
    let honest = run_scenario(&small_g1(""), None).unwrap();
    assert!(honest.passed, "{:?}", honest.failures().map(|c| &c.check_id).collect::<Vec<_>>());
    // the truncated Green function is not below half the stable one
    let r = run_scenario(&small_g1(r#", "upper": 0.5"#), None).unwrap();
    assert!(!r.passed);
    let cells = r.checks.iter().filter(|c| c.check_id.ends_with("/upper")).count();
    assert_eq!(failing(&r, "/upper"), cells);
    assert_eq!(failing(&r, "/lower"), 0);
    assert!(r.failures().all(|c| c.statement == Statement::GreenSandwich));
    // nor is it above three times it
    let r = run_scenario(&small_g1(r#", "lower": 3.0"#), None).unwrap();
    assert!(failing(&r, "/lower") > 0);
}

#[test]
fn seed_override_changes_estimates_not_verdicts() {
    let sc = small_g1("");
    let a = run_scenario(&sc, None).unwrap();
    let b = run_scenario(&sc, Some(12345)).unwrap();
    assert_eq!(a.seed, 11);
    assert_eq!(b.seed, 12345);
    assert_ne!(a.estimates[0].estimate.mean, b.estimates[0].estimate.mean);
    assert_eq!(a.passed, b.passed);
    let verdicts = |r: &Report| r.checks.iter().map(|c| (c.check_id.clone(), c.pass)).collect::<Vec<_>>();
    assert_eq!(verdicts(&a), verdicts(&b));
}

#[test]
fn reruns_give_identical_bodies() {
    let sc = small_g1("");
    let a = run_scenario(&sc, Some(7)).unwrap();
    let b = run_scenario(&sc, Some(7)).unwrap();
    assert_eq!(a.body_json(), b.body_json());
    let parsed: serde_json::Value = serde_json::from_str(&a.to_json()).unwrap();
    assert_eq!(parsed["seed"], 7);
    assert_eq!(parsed["checks"].as_array().unwrap().len(), a.checks.len());
}

#[test]
fn every_check_names_a_registered_statement() {
    let r = run_scenario(&small_g1(""), None).unwrap();
    let allowed = Experiment::G1.statements();
    for c in &r.checks {
        assert!(!c.statement.is_theory() || allowed.contains(&c.statement), "{} claims {:?}", c.check_id, c.statement);
    }
    assert!(r.checks.iter().any(|c| c.check_id == "censored_fraction"));
}

#[test]
fn unimplemented_experiment_is_an_error() {
    let mut sc = small_g1("");
    sc.name = Experiment::BhpLocal;
    sc.experiment = serde_json::json!({});
    assert!(run_scenario(&sc, None).is_err());
}
