use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(format!("{name}.json"))
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdde-lyap"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("spawn")
}

fn body(path: &Path) -> Value {
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert!(doc["header"]["timestamp_unix"].is_u64());
    doc["body"].clone()
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("m0");
    let out = run(&["lyapunov", p.to_str().unwrap(), "--set", "lyapunov.horizn=3"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lyapunov.horizn"));
}

#[test]
fn bad_value_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("m2");
    for (set, key) in [("simulate.horizon=-1", "simulate.horizon"), ("omega.points=0", "omega.points"), ("initial.constant=[1,2]", "initial")] {
        let out = run(&["simulate", p.to_str().unwrap(), "--set", set], dir.path());
        assert_eq!(out.status.code(), Some(2), "{set}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(key), "{set}");
    }
}

#[test]
fn malformed_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"name": "x", "model": {"preset": {"name": "m9"}}, "initial": {"constant": [1]}, "seed": 1}"#).unwrap();
    let out = run(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));
}

#[test]
fn blowup_exits_3_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grow.json");
    std::fs::write(
        &cfg,
        r#"{"name": "grow", "model": {"dsl": {"r": 1.0, "field": ["y1_1^2"], "delay": {"constant": 1.0}}},
            "driving": {"freq": [1.0]}, "initial": {"constant": [1.0]}, "seed": 1,
            "simulate": {"horizon": 3.0, "stride": 0.1}}"#,
    )
    .unwrap();
    let out = run(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let b = body(&dir.path().join("failure.json"));
    assert!(b["error"].as_str().unwrap().contains("blew up"));
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn simulate_writes_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("m3");
    let out = run(&["simulate", p.to_str().unwrap(), "--set", "simulate.horizon=2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,y_1,tau"));
    assert_eq!(csv.lines().count(), 42);
    assert_eq!(body(&dir.path().join("simulate.json"))["truncated"], false);
}

#[test]
fn lyapunov_writes_windows_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("m0");
    let out = run(
        &["lyapunov", p.to_str().unwrap(), "--seed", "9", "--threads", "2", "--set", "lyapunov.horizon=10", "--set", "lyapunov.directions=4"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("windows_w.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("point_id,dir_id,window_idx,log_growth"));
    assert_eq!(csv.lines().count(), 1 + 4 * 4 * 10);
    let b = body(&dir.path().join("lyapunov.json"));
    assert_eq!(b["report_C"]["provenance"]["seed"], 9);
    assert!((b["lambda_C"].as_f64().unwrap() + 1.0).abs() < 0.01);
}

#[test]
fn cover_and_basin_on_m4() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("m4");
    assert_eq!(run(&["cover", p.to_str().unwrap()], dir.path()).status.code(), Some(0));
    assert_eq!(body(&dir.path().join("cover.json"))["cover"]["k"], 2);
    assert_eq!(run(&["basin", p.to_str().unwrap()], dir.path()).status.code(), Some(0));
    let outcomes = body(&dir.path().join("basin.json"))["outcomes"].clone();
    let attracted: Vec<bool> = outcomes.as_array().unwrap().iter().map(|o| o["attracted"].as_bool().unwrap()).collect();
    assert_eq!(attracted, [true, true, false, false]);
}

#[test]
fn certify_m2_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let p = preset("m2");
    let out = run(&["certify", p.to_str().unwrap(), "--set", "certify.lambda_hat=-1.54"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(body(&dir.path().join("certificate.json"))["certificate"]["verdict"], "stable-consistent");
}
