use std::fs;
use std::process::{Command, Output};

fn gclat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gclat")).args(args).output().expect("binary runs")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn table_has_brb_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("table1.csv");
    let o = gclat(&["table", "--suite", "table1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("problem,model,resilience,measured,bound,pass\n"));
    assert!(csv.lines().any(|l| l == "BRB,async,n=4 f=1,2,2,pass"), "{csv}");
    assert!(!csv.contains(",fail"));
}

#[test]
fn out_of_region_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"protocol": "psync-vbb", "n": 4, "f": 2}"#).unwrap();
    let o = gclat(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("n ≥ 5f−1"), "{}", text(&o.stderr));
}

#[test]
fn run_reports_latency_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ok.json");
    let trace = dir.path().join("t.jsonl");
    fs::write(&cfg, r#"{"protocol": "bb-2delta", "n": 4, "f": 1, "delta": "2"}"#).unwrap();
    let o = gclat(&["run", "--config", cfg.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["last_commit"], "4/1");
    let h = gclat(&["trace", "--in", trace.to_str().unwrap(), "--party", "1"]);
    assert!(h.status.success());
    assert!(text(&h.stdout).lines().any(|l| l.contains("commit")), "{}", text(&h.stdout));
}

#[test]
fn scenario_1p5_passes() {
    let o = gclat(&["scenario", "--name", "LB-SYNC-1P5"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["scenario"], "LB-SYNC-1P5");
    assert!(!text(&o.stderr).contains("FAIL"));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let o = gclat(&["scenario", "--name", "LB-NOPE"]);
    assert_eq!(o.status.code(), Some(2));
}
