use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cylforms-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &str, config: &str, dir: &Path) -> (i32, Option<Value>) {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cylforms"))
        .args([cmd, "--config", cfg.to_str().unwrap(), "--out", dir.join("out").to_str().unwrap()])
        .output()
        .unwrap();
    let report = serde_json::from_slice(&out.stdout).ok();
    (out.status.code().unwrap(), report)
}

#[test]
fn curvature_report_and_csv() {
    let dir = scratch("curvature");
    let (code, report) = run("curvature", r#"{"metric": {"preset": "conformal-paper"}, "grid": {"n_z": 120}}"#, &dir);
    assert_eq!(code, 0);
    let report = report.unwrap();
    assert_eq!(report["command"], "curvature");
    assert_eq!(report["pass"], true);
    assert_eq!(report["verdicts"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.join("out/curvature.csv")).unwrap();
    assert_eq!(csv.lines().count(), 122);
    assert!(dir.join("out/curvature.report.json").exists());
}

#[test]
fn flat_scalar_dtn_matches_table() {
    let dir = scratch("dtn");
    let (code, report) = run("dtn", r#"{"metric": {"preset": "flat"}, "degree": 0, "grid": {"n_z": 400}, "modes": {"K_max": 6}}"#, &dir);
    assert_eq!(code, 0);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("out/dtn0.json")).unwrap()).unwrap();
    assert_eq!(v["degree"], 0);
    assert_eq!(v["K_max"], 6);
    assert_eq!(v["blocks"].as_array().unwrap().len(), 13);
    assert!(report.unwrap()["verdicts"][1]["pass"].as_bool().unwrap());
}

#[test]
fn failed_verdict_exits_one() {
    let dir = scratch("compare");
    let cfg = r#"{"degree": 1, "grid": {"n_z": 400}, "modes": {"K_max": 4}, "compare": {"expect": "indistinguishable"}}"#;
    let (code, report) = run("compare", cfg, &dir);
    assert_eq!(code, 1);
    assert_eq!(report.unwrap()["pass"], false);
}

#[test]
fn invalid_config_exits_two() {
    let dir = scratch("invalid");
    assert_eq!(run("dtn", r#"{"grid": {"Z": 0.0}}"#, &dir).0, 2);
    assert_eq!(run("dtn", r#"{"unknown": 1}"#, &dir).0, 2);
    assert_eq!(run("curvature", r#"{"metric": {"preset": "series"}}"#, &dir).0, 2);
    assert_eq!(run("operators-check", r#"{"metric": {"preset": "conformal-paper"}}"#, &dir).0, 2);
}

#[test]
fn reports_repeat_apart_from_timing() {
    let dir = scratch("repeat");
    let cfg = r#"{"stokes": {"pairs": 4}}"#;
    let (_, a) = run("stokes-check", cfg, &dir);
    let (_, b) = run("stokes-check", cfg, &dir);
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    assert_eq!(strip(a.unwrap()), strip(b.unwrap()));
}
