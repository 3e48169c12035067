use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hop")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SKEWED: &str = r#"{"mu": [0.05, -0.02, 0.01], "sigma": [[1.0, 0.3, 0.1], [0.3, 0.8, 0.2], [0.1, 0.2, 1.2]],
  "gamma": [0.3, -0.2, 0.1], "nu": 12.0}"#;

const SYMMETRIC: &str = r#"{"mu": [0, 0, 0], "sigma": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "gamma": [0, 0, 0], "nu": 10}"#;

fn weights(v: &Value) -> Vec<f64> {
    v["w_final"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn sample_is_deterministic_and_reingestible() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "params.json", SKEWED);
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let o = hop(&["sample", "--params", p(&params), "--count", "500", "--seed", seed, "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb, tc) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);
    let m = read_json(&dir.path().join("a.csv.manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    let r = hop_core::data::ReturnsMatrix::read_csv_path(&a).unwrap();
    assert_eq!((r.n_periods(), r.n_assets()), (500, 3));
}

#[test]
fn zero_count_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "params.json", SKEWED);
    let o = hop(&["sample", "--params", p(&params), "--count", "0"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap(), "asset_1,asset_2,asset_3\n");
}

#[test]
fn fit_writes_params_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "truth.json", SKEWED);
    let data = dir.path().join("data.csv");
    assert!(hop(&["sample", "--params", p(&params), "--count", "20000", "--seed", "3", "--out", p(&data)]).status.success());
    let out = dir.path().join("params.json");
    let o = hop(&["fit", p(&data), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let fitted = hop_core::model::GhMstParams::from_json(&text).unwrap();
    assert!((fitted.nu() - 12.0).abs() <= 2.0, "nu = {}", fitted.nu());
    let again = hop_core::model::GhMstParams::from_json(&fitted.to_json().unwrap()).unwrap();
    assert_eq!(again, fitted);
    let report = read_json(&dir.path().join("fit_report.json"));
    assert_eq!(report["schema"], "hop/v1");
    assert_eq!(report["manifest"]["command"], "fit");
    let trace: Vec<f64> = report["loglik_trace"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-10));
}

#[test]
fn bad_csv_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let o = hop(&["fit", p(&empty)]);
    assert_eq!(o.status.code(), Some(2));
    let bad = write(dir.path(), "bad.csv", "A,B\n0.1,0.2\n0.3,oops\n0.1,0.1\n");
    let o = hop(&["fit", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("row 3, column 2"), "{err}");
    let o = hop(&["fit", p(&dir.path().join("missing.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_xi_equals_explicit_lambdas() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "params.json", SKEWED);
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert!(hop(&["solve", "--params", p(&params), "--xi", "10", "--out", p(&a)]).status.success());
    let o = hop(&["solve", "--params", p(&params), "--lambdas", "1", "5", "18.333333333333332", "55", "--out", p(&b)]);
    assert!(o.status.success());
    let (wa, wb) = (weights(&read_json(&a)), weights(&read_json(&b)));
    assert!(wa.iter().zip(&wb).all(|(x, y)| (x - y).abs() <= 1e-10));
    let report = read_json(&a);
    assert_eq!(report["schema"], "hop/v1");
    assert_eq!(report["status"], "converged");
    assert!(report["manifest"]["config_digest"].is_string());
}

#[test]
fn symmetric_instance_gives_uniform_weights() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "params.json", SYMMETRIC);
    let o = hop(&["solve", "--params", p(&params), "--xi", "4"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(weights(&v).iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-12));
}

#[test]
fn iteration_cap_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "params.json", SKEWED);
    let o = hop(&["solve", "--params", p(&params), "--xi", "10", "--max-iter", "1", "--w0", "0.8,0.1,0.1"]);
    assert_eq!(o.status.code(), Some(3));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "max_iter_reached");
    let cfg = write(dir.path(), "cfg.json", r#"{"eta": -1}"#);
    let o = hop(&["solve", "--params", p(&params), "--xi", "10", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn tilt_with_huge_penalty_stays_home() {
    let dir = tempfile::tempdir().unwrap();
    let params = write(dir.path(), "params.json", SKEWED);
    let spec = write(dir.path(), "spec.json", r#"{"w0": "uniform", "d": "relative", "lambda": 1e6}"#);
    let o = hop(&["tilt", "--params", p(&params), "--spec", p(&spec)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let w = weights(&v["solve"]);
    assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-3));
    assert!(v["improved"].as_array().unwrap().len() == 4 && v["delta"].is_number());
    let trace: Vec<f64> = v["solve"]["objective_trace"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(trace.windows(2).all(|t| t[1] <= t[0]));
}

#[test]
fn error_experiment_and_bench_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("errors.csv");
    let o = hop(&["error-exp", "--n-list", "3", "--reps", "2", "--seed", "5", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,rep,t,eps_np,eps_st,fitted_nu,true_nu,converged");
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert!(f[3].parse::<f64>().unwrap() >= 0.0 && f[4].parse::<f64>().unwrap() >= 0.0);
    }
    let s = read_json(&dir.path().join("errors.csv.summary.json"));
    assert_eq!(s["summary"][0]["reps"], 2);

    let bench = dir.path().join("bench.csv");
    let cfg = write(dir.path(), "bench.json", r#"{"min_time_secs": 0}"#);
    let o = hop(&["bench", "--n-list", "5,10", "--reps", "2", "--mode", "pgd", "--config", p(&cfg), "--out", p(&bench)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&bench).unwrap().lines().count(), 5);
    let s = read_json(&dir.path().join("bench.csv.summary.json"));
    assert!(s["summary"]["slope"].is_number());
    assert_eq!(s["summary"]["mode"], "pgd");
}
