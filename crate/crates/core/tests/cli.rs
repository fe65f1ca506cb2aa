mod common;

use std::process::{Command, Output};

use common::fixture_path;

fn gridpomdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridpomdp"))
        .args(args)
        .env_remove("GRIDPOMDP_PROBLEMS_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn solve_reports_are_deterministic_and_carry_config() {
    let p = fixture_path("chain3");
    let args = ["solve", "--problem", p.to_str().unwrap(), "--grid", "1-E+3-R", "--format", "json"];
    let a = gridpomdp(&args);
    let b = gridpomdp(&args);
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["version"], gridpomdp::VERSION);
    assert_eq!(v["config"]["grid"], "1-E+3-R");
    assert_eq!(v["config"]["seed"], 1);
    assert_eq!(v["solution"]["criterion"], "average");
    let residuals = v["solution"]["residuals"].as_array().unwrap();
    assert!(residuals.iter().all(|r| r.as_f64().unwrap() <= 1e-8));
}

#[test]
fn zero_discount_gives_myopic_minima() {
    let p = fixture_path("two_state");
    let o = gridpomdp(&[
        "solve", "--problem", p.to_str().unwrap(), "--scheme", "d1", "--grid", "0-E",
        "--criterion", "discounted", "--alpha", "0", "--format", "json",
    ]);
    let v = json(&o);
    let values: Vec<f64> = v["solution"]["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // Vertex costs: good state min(0, 1) = 0, bad state min(2, 1) = 1.
    assert_eq!(values, vec![0.0, 1.0]);
}

#[test]
fn csv_and_text_outputs() {
    let p = fixture_path("two_state");
    let o = gridpomdp(&["solve", "--problem", p.to_str().unwrap(), "--grid", "2-E", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(r.headers().unwrap(), vec!["index", "belief", "gain", "bias", "action"]);
    assert_eq!(r.records().count(), 8);
    let t = gridpomdp(&["solve", "--problem", p.to_str().unwrap(), "--grid", "2-E", "--as-rewards"]);
    assert!(stdout(&t).contains("-0.27645788"), "{}", stdout(&t));
}

#[test]
fn output_file_embeds_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bound.json");
    let p = fixture_path("two_state");
    let o = gridpomdp(&[
        "bound", "--problem", p.to_str().unwrap(), "--grid", "4-E", "--samples", "200",
        "--seed", "5", "--format", "json", "--output", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 5);
    assert_eq!(v["config"]["samples"], 200);
    assert_eq!(v["version"], gridpomdp::VERSION);
    assert!(v.to_string().contains("sampled (under-estimate of sup)"));
}

#[test]
fn simulate_is_reproducible() {
    let p = fixture_path("ring3");
    let args = [
        "simulate", "--problem", p.to_str().unwrap(), "--grid", "1-E", "--trajectories", "20",
        "--horizon", "50", "--seed", "3", "--format", "json",
    ];
    let a = json(&gridpomdp(&args));
    let b = json(&gridpomdp(&args));
    assert_eq!(a, b);
    assert_eq!(a["config"]["trajectories"], 20);
}

#[test]
fn invalid_configurations_are_rejected() {
    let p = fixture_path("two_state");
    let p = p.to_str().unwrap();
    for args in [
        vec!["solve", "--problem", p, "--criterion", "discounted"],
        vec!["solve", "--problem", p, "--alpha", "0.9"],
        vec!["solve", "--problem", p, "--criterion", "discounted", "--alpha", "1.0"],
        vec!["solve", "--problem", p, "--order", "-2"],
        vec!["solve", "--problem", p, "--grid", "3-Q"],
        vec!["solve", "--problem", "/nonexistent.pomdp"],
        vec!["simulate", "--problem", p, "--trajectories", "0"],
    ] {
        let o = gridpomdp(&args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    }
}

#[test]
fn table2_isolates_missing_problem_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = gridpomdp(&["table2", "--problems-dir", dir.path().to_str().unwrap(), "--format", "json"]);
    assert!(!o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (row, name) in rows.iter().zip(["Paint", "Bridge", "Shuttle"]) {
        assert_eq!(row["problem"], name);
        assert!(row["error"].as_str().unwrap().contains("not found"));
    }
    let again = gridpomdp(&["table2", "--problems-dir", dir.path().to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.stdout, again.stdout);
}
