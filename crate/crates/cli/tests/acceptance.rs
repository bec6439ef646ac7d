use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

use sdde_lyap::suite;

const SEED: u64 = 1;

fn limit(id: u32) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(10)),
        2 => Some(Duration::from_secs(120)),
        _ => None,
    }
}

fn selftest_body(dir: &Path) -> Value {
    let status = Command::new(env!("CARGO_BIN_EXE_sdde-lyap"))
        .args(["selftest", "--seed", &SEED.to_string(), "--out-dir"])
        .arg(dir)
        .stderr(Stdio::null())
        .status()
        .expect("run selftest");
    assert!(status.code().is_some(), "selftest killed");
    let text = std::fs::read_to_string(dir.join("selftest.json")).expect("selftest.json");
    let mut doc: Value = serde_json::from_str(&text).expect("json");
    let obj = doc.as_object_mut().expect("object");
    assert!(obj.remove("header").is_some());
    doc
}

fn criterion_10() -> (bool, String) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (x, y) = (selftest_body(a.path()), selftest_body(b.path()));
    (x == y, format!("schema_version {}", x["schema_version"]))
}

fn main() {
    let mut failed = Vec::new();
    for id in 1..=9 {
        let start = Instant::now();
        let c = suite::run(id, SEED);
        let elapsed = start.elapsed();
        let in_time = limit(id).is_none_or(|l| elapsed <= l);
        let pass = c.passed && in_time;
        let timing = match limit(id) {
            Some(l) => format!(" [{:.1}s, limit {}s]", elapsed.as_secs_f64(), l.as_secs()),
            None => format!(" [{:.1}s]", elapsed.as_secs_f64()),
        };
        println!("{} criterion {id}: {}{timing} {}", if pass { "PASS" } else { "FAIL" }, c.title, c.values);
        if !pass {
            failed.push(id);
        }
    }
    let (same, note) = criterion_10();
    println!("{} criterion 10: repeated selftest artifacts identical ({note})", if same { "PASS" } else { "FAIL" });
    if !same {
        failed.push(10);
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
