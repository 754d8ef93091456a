//! End-to-end behavior of the binary: exit codes, output determinism,
//! JSON round-trips, and fixture handling.

use std::path::{Path, PathBuf};
use std::process::Output;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pptube")
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn run(args: &[&str]) -> Output {
    std::process::Command::new(bin())
        .args(args)
        .env_remove("PPTUBE_SEED")
        .current_dir(workspace_root())
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn missing_file_exits_2() {
    let out = run(&["pursue", "--data", "no_such_file.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_csv_exits_2() {
    let dir = std::env::temp_dir().join("pptube_cli_bad");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.csv");
    std::fs::write(&path, "1.0,2.0\n3.0,oops\n1,2\n1,2\n1,2\n").unwrap();
    let out = run(&["pursue", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let ragged = dir.join("ragged.csv");
    std::fs::write(&ragged, "1,2\n3,4,5\n1,2\n1,2\n1,2\n").unwrap();
    let out = run(&["pursue", "--data", ragged.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let narrow = dir.join("narrow.csv");
    std::fs::write(&narrow, "1\n2\n3\n4\n5\n").unwrap();
    let out = run(&["pursue", "--data", narrow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degenerate_data_exits_3() {
    let dir = std::env::temp_dir().join("pptube_cli_degen");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("constant.csv");
    let row = "1.5,-2.0\n".repeat(20);
    std::fs::write(&path, row).unwrap();
    let out = run(&["pursue", "--data", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_usage_exits_2() {
    let out = run(&["tail-table", "--q", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["tail-table", "--q", "2", "--range", "1:2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--mode", "finite", "--q", "2", "--reps", "10", "--thresholds", "1"]);
    assert_eq!(out.status.code(), Some(2)); // missing --n
    let out = run(&["tube-volume", "--theta", "0.7", "--mc-reps", "10"]);
    assert_eq!(out.status.code(), Some(2)); // beyond the critical radius
}

#[test]
fn pursue_json_round_trip_and_repeatability() {
    let args = [
        "pursue",
        "--data",
        "fixtures/null_n500_q2.csv",
        "--header",
        "--seed",
        "42",
    ];
    let first = stdout_of(&args);
    let second = stdout_of(&args);
    assert_eq!(first, second, "same seed must give identical bytes");

    let value: serde_json::Value = serde_json::from_str(&first).unwrap();
    let reserialized = serde_json::to_string_pretty(&value).unwrap();
    let reparsed: serde_json::Value = serde_json::from_str(&reserialized).unwrap();
    assert_eq!(
        value.get("p_value").unwrap().as_f64().unwrap(),
        reparsed.get("p_value").unwrap().as_f64().unwrap()
    );
    assert_eq!(
        value.get("h_star").unwrap().as_array().unwrap(),
        reparsed.get("h_star").unwrap().as_array().unwrap()
    );
}

#[test]
fn pursue_null_and_planted_pvalues() {
    let null_out = stdout_of(&[
        "pursue",
        "--data",
        "fixtures/null_n500_q2.csv",
        "--header",
        "--seed",
        "42",
    ]);
    let v: serde_json::Value = serde_json::from_str(&null_out).unwrap();
    let p = v["p_value"].as_f64().unwrap();
    assert!(p > 0.05 && p <= 1.0, "null p-value {p}");

    let planted_out = stdout_of(&[
        "pursue",
        "--data",
        "fixtures/planted_n500_q2.csv",
        "--header",
        "--seed",
        "42",
    ]);
    let v: serde_json::Value = serde_json::from_str(&planted_out).unwrap();
    let p = v["p_value"].as_f64().unwrap();
    assert!(p < 0.01, "planted p-value {p}");
    let h = v["h_star"].as_array().unwrap();
    assert!(h[0].as_f64().unwrap().abs() > 0.9, "planted direction {h:?}");
}

#[test]
fn pursue_csv_output_and_headerless_input() {
    let dir = std::env::temp_dir().join("pptube_cli_headerless");
    std::fs::create_dir_all(&dir).unwrap();
    let content = std::fs::read_to_string(workspace_root().join("fixtures/null_n500_q2.csv")).unwrap();
    let body: String = content.lines().skip(1).collect::<Vec<_>>().join("\n");
    let path = dir.join("headerless.csv");
    std::fs::write(&path, &body).unwrap();

    let with_header = stdout_of(&[
        "pursue",
        "--data",
        "fixtures/null_n500_q2.csv",
        "--header",
        "--seed",
        "7",
        "--csv",
    ]);
    let without = stdout_of(&["pursue", "--data", path.to_str().unwrap(), "--seed", "7", "--csv"]);
    assert_eq!(with_header, without);
    assert!(with_header.starts_with("q,n,seed,max_index,p_value,clamped,h_star"));
}

#[test]
fn tail_table_monotone_rows() {
    let out = stdout_of(&["tail-table", "--q", "2", "--range", "4:36:1"]);
    let mut prev = f64::INFINITY;
    for line in out.lines().skip(1) {
        let tail: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(tail <= prev + 1e-15);
        prev = tail;
    }
}

#[test]
fn simulate_deterministic_across_runs_and_workers() {
    let base = [
        "simulate",
        "--mode",
        "limit",
        "--q",
        "2",
        "--reps",
        "200",
        "--seed",
        "77",
        "--thresholds",
        "4,9,16",
        "--grid",
        "1024",
    ];
    let single: Vec<&str> = base.iter().copied().chain(["--workers", "1"]).collect();
    let multi: Vec<&str> = base.iter().copied().chain(["--workers", "4"]).collect();
    let a = stdout_of(&single);
    let b = stdout_of(&multi);
    let c = stdout_of(&single);
    assert_eq!(a, b, "worker count changed the output");
    assert_eq!(a, c, "rerun changed the output");
}

#[test]
fn fixtures_regenerate_byte_exact() {
    let dir = std::env::temp_dir().join("pptube_cli_fixtures");
    let _ = std::fs::remove_dir_all(&dir);
    let out = run(&["regen-fixtures", "--dir", dir.to_str().unwrap()]);
    assert!(out.status.success());
    for name in ["null_n500_q2.csv", "planted_n500_q2.csv"] {
        let committed = std::fs::read(workspace_root().join("fixtures").join(name)).unwrap();
        let regenerated = std::fs::read(dir.join(name)).unwrap();
        assert_eq!(committed, regenerated, "{name} drifted from its seed");
    }
}

#[test]
fn verify_specfun_suite_passes_and_reports_json() {
    let out = run(&["verify", "--suite", "specfun"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(v["pass"], serde_json::Value::Bool(true));
    assert!(v["checks"].as_array().unwrap().len() >= 5);
    // includes the tabulated boundary digit check
    let names: Vec<String> = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect();
    assert!(names.iter().any(|n| n.contains("1.46746")));
}
