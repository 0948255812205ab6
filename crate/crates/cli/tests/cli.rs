use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torusdisc"))
}

#[test]
fn certify_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert");
    let st = bin()
        .args(["certify", "--seed", "5", "--threads", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    for f in ["raw.csv", "summary.json", "config_echo.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["passed"], true);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version":1,"kind":"jitter_rates","dim":1,"sizes":[2,4,8],"seed":1,"replicates":100}"#,
    )
    .unwrap();
    let out = dir.path().join("j");
    let st = bin()
        .args(["jitter", "--seed", "9", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let echo: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("config_echo.json")).unwrap()).unwrap();
    assert_eq!(echo["config"]["seed"], 9);
    assert_eq!(echo["config"]["sizes"], serde_json::json!([2, 4, 8]));
}

#[test]
fn kind_outside_subcommand_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let st = bin()
        .args(["morrey", "--kind", "jitter_rates", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&st.stderr).contains("not handled"));
}

#[test]
fn unknown_config_field_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"schema_version":1,"kind":"certificate_audit","bogus":3}"#).unwrap();
    let st = bin().arg("certify").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn single_point_set_report() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.txt");
    std::fs::write(&pts, "1 2\n0.0 1.0\n0.5 1.0\n").unwrap();
    let st = bin()
        .args(["discrepancy", "--method", "pairwise", "--points"])
        .arg(&pts)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let line = String::from_utf8(st.stdout).unwrap();
    let report: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    assert!(report["value"].as_f64().unwrap() > 0.0);
}
