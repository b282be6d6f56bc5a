use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overlapix"))
        .args(args)
        .envs(env.iter().copied())
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn report_on_toy() {
    let v = stdout_json(&run(&["report", p(&fixture("toy4.json"))]));
    assert_eq!(v["selection"]["members"], serde_json::json!(["S1", "S4"]));
    assert_eq!(v["bound"]["lower_bound_proxy_decimal"], "5.45");
    assert_eq!(v["tool"]["name"], "overlapix");
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(v["partition"]["scheme"], "singleton");
}

#[test]
fn report_reproduces_from_echoed_input() {
    let first = run(&["report", p(&fixture("toy4.csv"))]);
    let v = stdout_json(&first);
    let dir = tempfile::tempdir().unwrap();
    let echo = dir.path().join("echo.json");
    std::fs::write(&echo, v["input"].to_string()).unwrap();
    let second = run(&["report", p(&echo)]);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn csv_and_json_give_the_same_results() {
    for cmd in ["pairs", "potentials", "overlap-free", "bound", "encode"] {
        let a = run(&[cmd, p(&fixture("toy4.json"))]);
        let b = run(&[cmd, "--format", "csv", p(&fixture("toy4.csv"))]);
        assert!(a.status.success() && b.status.success());
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn malformed_input_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(fixture("toy4.json")).unwrap();
    std::fs::write(&bad, text.replacen("\"sample_size\": 4,", "\"sample_size\": 4", 1)).unwrap();
    let o = run(&["validate", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 9"), "{}", stderr(&o));
}

#[test]
fn missing_characteristic_policies() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("gap.csv");
    let text = std::fs::read_to_string(fixture("toy4.csv")).unwrap();
    std::fs::write(&csv, text.replace("S3,2,area 2;area 3,", "S3,2,,")).unwrap();
    let o = run(&["validate", p(&csv)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`S3`") && stderr(&o).contains("`location`"));
    let o = run(&["validate", "--missing", "full-range", p(&csv)]);
    assert!(o.status.success());
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["report", "--bogus", "x"]).status.code(), Some(1));
    let usage = stderr(&run(&["report", "--bogus", "x"]));
    assert!(usage.contains("Usage"));
    assert_eq!(run(&["report", "/no/such/file.json"]).status.code(), Some(2));
    let o = run_env(&["report", p(&fixture("toy4.json"))], &[("OVERLAPIX_TIME_BUDGET_SECS", "0")]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(run(&["--help"]).status.success());
}

#[test]
fn too_few_studies() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(
        &empty,
        r#"{"schema_version": 1, "characteristics": [{"id": "c", "kind": "categorical"}], "studies": []}"#,
    )
    .unwrap();
    assert!(run(&["validate", p(&empty)]).status.success());
    let o = run(&["potentials", p(&empty)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("need at least 2 studies"));
}

#[test]
fn inverse_variance_needs_standard_errors() {
    let o = run(&["overlap-free", "--criterion", "inverse-variance", p(&fixture("toy4.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("S1, S2, S3, S4"));
}

#[test]
fn out_dir_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["report", "--out", p(&out), p(&fixture("toy4.json"))]);
    assert!(o.status.success());
    for f in ["bundle.json", "heatmap.svg", "heatmap.csv", "gridplot.svg", "gridplot.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(std::fs::read(out.join("bundle.json")).unwrap(), o.stdout);
}

#[test]
fn partition_flags() {
    let v = stdout_json(&run(&["encode", "--partition", "width=2", p(&fixture("toy4.json"))]));
    assert_eq!(v["characteristics"], serde_json::json!([["location", 4], ["time", 2]]));
    let dir = tempfile::tempdir().unwrap();
    let bins = dir.path().join("bins.json");
    std::fs::write(&bins, r#"{"time": [["2021"], ["2022", "2023"]]}"#).unwrap();
    let arg = format!("file={}", p(&bins));
    let v = stdout_json(&run(&["encode", "--partition", &arg, p(&fixture("toy4.json"))]));
    assert_eq!(v["characteristics"], serde_json::json!([["location", 4], ["time", 2]]));
    std::fs::write(&bins, r#"{"time": [["2021", "2023"], ["2022"]]}"#).unwrap();
    assert_eq!(run(&["encode", "--partition", &arg, p(&fixture("toy4.json"))]).status.code(), Some(1));
    assert_eq!(run(&["encode", "--partition", "width=0", p(&fixture("toy4.json"))]).status.code(), Some(1));
}

#[test]
fn top_k_on_a_39_study_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    let o = run(&[
        "oracle", "generate", "--studies", "39", "--intensity", "0.6", "--padding", "0.5", "--seed", "39",
        "--out", p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let plots = dir.path().join("plots");
    let v = stdout_json(&run(&[
        "potentials", "--top-k", "50", "--out", p(&plots), p(&out.join("envelopes.json")),
    ]));
    assert_eq!(v["combinations"].as_array().unwrap().len(), 50);
    assert_eq!(v["truncated"], true);
    let grid = std::fs::read_to_string(plots.join("gridplot.txt")).unwrap();
    // Header plus one line per study plus the truncation note.
    assert_eq!(grid.lines().count(), 1 + 39 + 1);
    assert_eq!(grid.lines().next().unwrap().split_whitespace().count(), 51);
}

#[test]
fn oracle_generate_is_seeded() {
    let a = run(&["oracle", "generate", "--studies", "7", "--seed", "5"]);
    let b = run(&["oracle", "generate", "--studies", "7", "--seed", "5"]);
    let c = run(&["oracle", "generate", "--studies", "7", "--seed", "6"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn distorted_sweep_reports_violations() {
    // Moving recorded values across bins is the only way to break soundness.
    // These seeds include one that does; the offending instance is written
    // out and replays as a failure.
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "oracle", "sweep", "--instances", "50", "--studies", "6", "--distortion", "0.8", "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("soundness violations"));
    let replay = dir.path().join("violation-0-seed-44.json");
    let o = run(&["oracle", "check", p(&replay)]);
    assert_eq!(o.status.code(), Some(1));
}
