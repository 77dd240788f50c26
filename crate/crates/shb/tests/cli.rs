//! End-to-end tests of the `shb` binary: exit codes, artifact files, and
//! byte-level determinism of the written outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn shb(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shb"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const ESCAPING: &str = r#"{
    "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 1.5},
    "ic": [0.8, 0.0, 0.0, 0.0],
    "span": 100.0
}"#;

#[test]
fn simulate_writes_identical_artifacts_on_repeat() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 3.5},
            "ic": [0.8, 0.0, 0.0, 0.0],
            "span": 10.0
        }"#,
    );
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    assert_eq!(code(&shb("simulate", &cfg, &out_a, &[])), 0);
    assert_eq!(code(&shb("simulate", &cfg, &out_b, &[])), 0);

    let csv_a = fs::read(out_a.join("trajectory.csv")).unwrap();
    let csv_b = fs::read(out_b.join("trajectory.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b, "repeat runs must be byte-identical");

    let audit = json(&out_a.join("energy.json"));
    assert!(audit["max_drift"].as_f64().unwrap().is_finite());
}

#[test]
fn bad_configs_exit_with_code_2() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");

    let truncated = write_config(tmp.path(), r#"{"problem": {"kind": "prototype""#);
    let res = shb("simulate", &truncated, &out, &[]);
    assert_eq!(code(&res), 2);
    assert!(String::from_utf8_lossy(&res.stderr).contains("configuration"));

    let missing = tmp.path().join("nope.json");
    assert_eq!(code(&shb("simulate", &missing, &out, &[])), 2);

    let unknown = write_config(
        tmp.path(),
        r#"{
            "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 1.5},
            "ic": [0.8, 0.0, 0.0, 0.0],
            "surprise": 1
        }"#,
    );
    assert_eq!(code(&shb("simulate", &unknown, &out, &[])), 2);
}

#[test]
fn ladder_without_a_complete_rung_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 1.5},
            "ic": [0.8, 0.0, 0.0, 0.0],
            "span": 3.0
        }"#,
    );
    assert_eq!(code(&shb("ladder", &cfg, &tmp.path().join("out"), &[])), 3);
}

#[test]
fn blowup_report_brackets_the_frozen_escape() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), ESCAPING);
    let out = tmp.path().join("out");
    assert_eq!(code(&shb("blowup", &cfg, &out, &[])), 0);

    let report = json(&out.join("blowup.json"));
    assert_eq!(report["verdict"], "finite_escape");
    assert_eq!(report["theorem_regime"], true);
    let lo = report["R_lower"].as_f64().unwrap();
    let hi = report["R_upper"].as_f64().unwrap();
    let escape = 6.705143274646;
    assert!(lo < escape && escape < hi, "[{lo}, {hi}] misses {escape}");
}

#[test]
fn shoot_at_the_threshold_exits_4() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 2.0},
            "ic": [0.0, 0.0, 0.0, 0.0],
            "scan": {"a_min": 1e-2, "a_max": 1e2, "grid": 13}
        }"#,
    );
    assert_eq!(code(&shb("shoot", &cfg, &tmp.path().join("out"), &[])), 4);
}

#[test]
fn shoot_above_threshold_writes_the_periodic_pair() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
            "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 3.5},
            "ic": [0.0, 0.0, 0.0, 0.0]
        }"#,
    );
    let out = tmp.path().join("out");
    assert_eq!(code(&shb("shoot", &cfg, &out, &[])), 0);

    let summary = json(&out.join("periodic.json"));
    let a_star = summary["a_star"].as_f64().unwrap();
    assert!((a_star - 2.107477523466).abs() <= 1e-6 * a_star);
    assert!(summary["period"].as_f64().unwrap() > 0.0);
    assert!(!fs::read(out.join("periodic.csv")).unwrap().is_empty());
}

#[test]
fn rescale_validates_the_canonical_problem() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");

    let good = write_config(
        tmp.path(),
        r#"{
            "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 4.0},
            "ic": [0.8, 0.0, 0.0, 0.0],
            "span": 5.0,
            "mu": 0.75
        }"#,
    );
    assert_eq!(code(&shb("rescale", &good, &out, &[])), 0);
    let summary = json(&out.join("rescale.json"));
    assert_eq!(summary["amplitude_factor"].as_f64().unwrap(), 2.0);
    assert_eq!(summary["canonical_k"].as_f64().unwrap(), 4.0);
    assert!(summary["max_form_residual"].as_f64().unwrap() <= 1e-5);
    assert!(!fs::read(out.join("rescaled.csv")).unwrap().is_empty());

    // k = 3.0 does not match the problem mu = 0.75 maps to.
    let mismatched = write_config(
        tmp.path(),
        r#"{
            "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 3.0},
            "ic": [0.8, 0.0, 0.0, 0.0],
            "span": 5.0,
            "mu": 0.75
        }"#,
    );
    assert_eq!(code(&shb("rescale", &mismatched, &out, &[])), 2);

    let no_mu = write_config(
        tmp.path(),
        r#"{
            "problem": {"kind": "prototype", "alpha": 1.0, "q": 1.0, "p": 3.0, "k": 4.0},
            "ic": [0.8, 0.0, 0.0, 0.0],
            "span": 5.0
        }"#,
    );
    assert_eq!(code(&shb("rescale", &no_mu, &out, &[])), 2);
}

#[test]
fn figure_emits_a_selfcontained_svg() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), ESCAPING);
    let out = tmp.path().join("out");
    assert_eq!(code(&shb("figure", &cfg, &out, &["--tol", "1e-8"])), 0);

    let svg = fs::read_to_string(out.join("figure.svg")).unwrap();
    assert!(svg.contains("<svg"));
    assert!(svg.contains("R⁺"));
}
