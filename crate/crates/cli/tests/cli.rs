use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn funloc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funloc"))
        .args(args)
        .current_dir(dir)
        .env_remove("FUNLOC_THREADS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const DIAGNOSE: &str = r#"{
    "model": {"eigen": {"kind": "exp", "gamma": 2}},
    "target": {"kind": "exp_linear", "theta_coeffs": [0.64, 0.48]},
    "J": 2, "K": 2, "n": 300, "delta": 0.6, "u0_samples": 20000, "seed": 3
}"#;

const STUDY: &str = r#"{
    "model": {"eigen": {"kind": "exp", "C_lambda": 1, "C_gamma1": 1, "gamma": 2}},
    "target": {"kind": "exp_linear", "theta_coeffs": [0.64, 0.48]},
    "noise": {"sigma": 0.25},
    "delta": 0.6,
    "n_grid": [200, 100, 400],
    "replications": 10,
    "fixed_arms": [[3, 3]],
    "seed": 7
}"#;

#[test]
fn check_conditions_reports_worked_values() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&funloc(&["check-conditions", "--D0", "0.09", "--D1", "0.95", "--gamma", "12"], dir.path()));
    assert_eq!(v["cond1_value"], 1.08);
    assert_eq!(v["cond2_printed"], false);
    assert_eq!(v["all_hold"], true);
    assert!((v["kappa_target"].as_f64().unwrap() - 0.0595).abs() < 1e-12);
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.json"), DIAGNOSE).unwrap();
    let out = funloc(&["simulate", "--config", "d.json", "--out", "sim"], dir.path());
    assert!(out.status.success());
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("sim/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);

    let args = ["estimate", "--data", "sim/dataset.csv", "--site", "0,0", "--delta", "0.6", "--J", "2", "--K", "2"];
    let v = json(&funloc(&args, dir.path()));
    assert_eq!(v["alpha"].as_array().unwrap().len(), 3);
    assert_eq!(v["g_hat"], v["alpha"][0]);
    assert!(v["n_local"].as_u64().unwrap() > 0);
    assert_eq!(v["solver_report"]["method"], "cholesky");

    fs::write(dir.path().join("site.csv"), "coeff_1,coeff_2\n0,0\n").unwrap();
    let args = ["estimate", "--data", "sim/dataset.csv", "--site", "site.csv", "--delta", "0.6", "--J", "2", "--K", "2"];
    assert_eq!(json(&funloc(&args, dir.path()))["g_hat"], v["g_hat"]);
}

#[test]
fn diagnose_merges_decomposition_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.json"), DIAGNOSE).unwrap();
    let v = json(&funloc(&["diagnose", "--config", "d.json"], dir.path()));
    let parts: f64 = ["b1", "b2", "b3", "v"].iter().map(|k| v[k].as_f64().unwrap()).sum();
    let err = v["g_hat"].as_f64().unwrap() - v["g_true"].as_f64().unwrap();
    assert!((err - parts).abs() < 1e-10);
    assert_eq!(v["u0_pass"], true);
    assert!(v["variance_proxy"].as_f64().unwrap() > 0.0);
}

#[test]
fn rate_study_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.json"), STUDY).unwrap();
    let a = funloc(&["rate-study", "--config", "s.json", "--out", "a", "--threads", "1"], dir.path());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(String::from_utf8_lossy(&a.stderr).contains("sorted"));
    let b = Command::new(env!("CARGO_BIN_EXE_funloc"))
        .args(["rate-study", "--config", "s.json", "--out", "b"])
        .env("FUNLOC_THREADS", "4")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(b.status.success());
    for f in ["results.csv", "summary.json", "plotdata.csv"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    assert!(csv.starts_with("n,J,K,median_sq_err,mean_sq_err,q10,q90,mean_n_local,smallball_hat,arm\n"));
    assert!(csv.lines().nth(1).unwrap().starts_with("100,"));
    let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes_follow_error_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let bad = STUDY.replace("\"sigma\": 0.25", "\"sigma\": -1");
    fs::write(dir.path().join("bad.json"), bad).unwrap();
    let out = funloc(&["rate-study", "--config", "bad.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("noise.sigma"));

    let out = funloc(&["rate-study", "--config", "missing.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(4));

    fs::write(dir.path().join("d.csv"), "y,coeff_1\n1.0,0.1\n").unwrap();
    let out = funloc(&["estimate", "--data", "d.csv", "--site", "0", "--delta", "1.5", "--J", "1", "--K", "1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
