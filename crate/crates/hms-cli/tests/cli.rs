//! End-to-end tests of the `hms` binary: golden outputs, exit codes and help text.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hms")).args(args).env_remove("HMS_BUDGET_MS").output().expect("hms runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).expect("golden file")
}

#[test]
fn golden_invariants_85() {
    let out = hms(&["invariants", "--field", "85", "--level", "1.1.0", "--component", "0", "--variant", "gamma0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout.clone()).unwrap(), golden("invariants_85_gamma0.json"));
    let inv = &stdout_json(&out)["invariants"];
    assert_eq!(inv["chi"], 4);
    assert_eq!(inv["c1_sq"], -8);
}

#[test]
fn golden_cusps_level_two_over_sqrt5() {
    let out = hms(&["cusps", "--field", "5", "--level", "4.2.0", "--variant", "gamma0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout.clone()).unwrap(), golden("cusps_5_level_2.json"));
    // (2) is inert, so Σ_{𝔐|𝔑} φ(𝔐 + 𝔑/𝔐) = 1 + 1
    assert_eq!(stdout_json(&out)["count"], 2);
}

#[test]
fn golden_field_info_12() {
    let out = hms(&["field-info", "--field", "12"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout.clone()).unwrap(), golden("field_info_12.json"));
    let v = stdout_json(&out);
    assert_eq!(v["zeta_minus_one"], "1/6");
    assert_eq!(v["h_plus"], 2);
}

#[test]
fn level_by_norm_and_index() {
    let a = stdout_json(&hms(&["cusps", "--field", "5", "--level", "4.0"]));
    let b = stdout_json(&hms(&["cusps", "--field", "5", "--level", "4"]));
    assert_eq!(a, b);
    assert_eq!(a["level"], "4.2.0");
}

#[test]
fn hilbert_series_dimensions() {
    let v = stdout_json(&hms(&["hilbert-series", "--field", "5", "--max-weight", "12"]));
    let dims: Vec<i64> = (2..=12).step_by(2).map(|k| v["dims"][k.to_string()].as_i64().unwrap()).collect();
    assert_eq!(dims, vec![0, 0, 1, 1, 2, 3]);
}

#[test]
fn csv_output() {
    let out = hms(&["invariants", "--field", "85", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("d_f,level,component,variant,vol,c1_sq,c2,chi"));
    assert!(lines.next().unwrap().starts_with("85,1.1.0,0,Gamma0,6,-8,56,4,"));
}

#[test]
fn output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inv.json");
    let out = hms(&["invariants", "--field", "5", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["invariants"]["chi"], 1);
}

#[test]
fn invalid_input_exit_code() {
    for args in [
        vec!["invariants", "--field", "4"],
        vec!["invariants", "--field", "5", "--level", "3.1.0"],
        vec!["invariants", "--field", "5", "--component", "1"],
        vec!["hilbert-series", "--field", "5", "--max-weight", "1"],
    ] {
        let out = hms(&args);
        assert_eq!(out.status.code(), Some(1), "{:?}", args);
        let e = stderr_json(&out);
        assert_eq!(e["error"]["kind"], "invalid-input", "{:?}", args);
        assert_eq!(e["error"]["exit_code"], 1);
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(hms(&["invariants", "--field", "5", "--unknown-flag"]).status.code(), Some(1));
    assert_eq!(hms(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(hms(&["invariants", "--field", "5", "--variant", "gamma7"]).status.code(), Some(1));
    assert_eq!(hms(&["invariants"]).status.code(), Some(1));
}

#[test]
fn csv_errors_are_plain_text() {
    let out = hms(&["invariants", "--field", "4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: invalid input"));
}

#[test]
fn budget_exit_code() {
    let out = hms(&["invariants", "--field", "85", "--budget-ms", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"]["kind"], "budget");
    let out = Command::new(env!("CARGO_BIN_EXE_hms"))
        .args(["invariants", "--field", "85"])
        .env("HMS_BUDGET_MS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sweep_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = hms(&["sweep", "--max-df", "40", "--cutoff", "300", "--jobs", "2", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["errors"], 0);
    assert!(summary["keys"].as_u64().unwrap() > 0);

    let out = hms(&["verify", "--dataset", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["clean"], true);

    // a single JSONL file is accepted as well
    let file = out_dir.join("gamma0.jsonl");
    let out = hms(&["verify", "--dataset", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));

    // resuming skips every key
    let out = hms(&["sweep", "--max-df", "40", "--cutoff", "300", "--jobs", "2", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(stdout_json(&out)["computed"], 0);

    // a different configuration in the same directory is rejected
    let out = hms(&["sweep", "--max-df", "41", "--cutoff", "300", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tampered_dataset_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = hms(&["sweep", "--max-df", "13", "--cutoff", "100", "--variants", "gamma0", "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let file = out_dir.join("gamma0.jsonl");
    let text = std::fs::read_to_string(&file).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let c2 = lines[0]["invariants"]["c2"].as_i64().unwrap();
    lines[0]["invariants"]["c2"] = Value::from(c2 + 12);
    let tampered: String = lines.iter().map(|v| format!("{}\n", v)).collect();
    std::fs::write(&file, tampered).unwrap();
    let out = hms(&["verify", "--dataset", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report = stdout_json(&out);
    assert_eq!(report["clean"], false);
    assert!(!report["violations"].as_array().unwrap().is_empty());
}

#[test]
fn missing_dataset_is_invalid_input() {
    let out = hms(&["verify", "--dataset", "/nonexistent/hms/data.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_lists_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        ("field-info", &["--field", "--format", "--output", "--budget-ms"]),
        ("cusps", &["--field", "--level", "--component", "--variant", "--format", "--output", "--budget-ms"]),
        ("elliptic", &["--field", "--level", "--component", "--variant", "--format", "--output", "--budget-ms"]),
        ("invariants", &["--field", "--level", "--component", "--variant", "--fixtures", "--format", "--output", "--budget-ms"]),
        ("hilbert-series", &["--field", "--level", "--max-weight", "--format", "--output", "--budget-ms"]),
        ("sweep", &["--max-df", "--cutoff", "--variants", "--discriminants", "--jobs", "--fixtures", "--format", "--output", "--budget-ms"]),
        ("verify", &["--dataset", "--fixtures", "--format", "--output", "--budget-ms"]),
    ];
    let top = String::from_utf8(hms(&["--help"]).stdout).unwrap();
    for (cmd, flags) in expected {
        assert!(top.contains(cmd), "top-level help misses {}", cmd);
        let out = hms(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0));
        let text = String::from_utf8(out.stdout).unwrap();
        for f in *flags {
            assert!(text.contains(f), "help of {} misses {}", cmd, f);
        }
        assert!(text.contains("HMS_BUDGET_MS"));
    }
}
