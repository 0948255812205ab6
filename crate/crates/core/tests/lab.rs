use torusdisc::lab::{fit_exponent, run, write_reports, ExperimentConfig, ExperimentKind};
use torusdisc::Error;

#[test]
fn runs_are_reproducible() {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::LpLower);
    cfg.seed = 9;
    cfg.trials = 2;
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.table, b.table);
    assert_eq!(a.summary, b.summary);
    cfg.seed = 10;
    assert_ne!(run(&cfg).unwrap().table, a.table);
}

#[test]
fn reports_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::HolderRates);
    cfg.sizes = vec![4, 8, 16];
    let out = run(&cfg).unwrap();
    write_reports(dir.path(), &out).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("raw.csv")).unwrap();
    assert!(csv.starts_with("N,r,J_closed,J_mc,stderr,tail_bound\n"));
    assert_eq!(csv.lines().count(), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(summary["fits"]["closed"]["slope"].is_number());
    assert_eq!(summary["seed"], 0);
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("config_echo.json")).unwrap()).unwrap();
    let back: ExperimentConfig = serde_json::from_value(echo["config"].clone()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn run_refuses_hypothesis_violations() {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::LpLower);
    cfg.p = 1.0;
    assert!(matches!(run(&cfg), Err(Error::InvalidParameter { name: "p", .. })));
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::MorreyLower);
    cfg.lambda = 2.0;
    assert!(run(&cfg).is_err());
}

#[test]
fn failing_invariant_lists_offenders() {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::HolderRates);
    cfg.sizes = vec![4, 8, 16];
    cfg.beta = 1.0;
    cfg.slope_tolerance = 1e-6;
    let out = run(&cfg).unwrap();
    assert!(!out.summary.passed);
    let check = out.summary.checks.iter().find(|c| !c.passed).unwrap();
    assert_eq!(check.offending.len(), 3);
}

#[test]
fn signed_demo_matches_weights() {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::SignedWeights);
    cfg.sizes = vec![1, 2, 4, 8];
    cfg.tolerance = 1e-6;
    let out = run(&cfg).unwrap();
    assert!(out.summary.passed, "{:?}", out.summary.checks);
}

#[test]
fn fit_of_jitter_rates_for_constant_density() {
    let mut cfg = ExperimentConfig::for_kind(ExperimentKind::JitterRates);
    cfg.sizes = vec![2, 4, 8];
    let out = run(&cfg).unwrap();
    assert!(out.summary.passed);
    let table: Vec<(f64, f64)> = out
        .table
        .rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[2].parse().unwrap()))
        .collect();
    let fit = fit_exponent(&table).unwrap();
    assert!((fit.slope + 2.0).abs() < 0.1);
}
