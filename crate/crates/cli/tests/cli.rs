use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const THREE_PARTY: &str = "n = 3\npivs = [\"010\", \"101\"]\nseed = 7\n";

fn otmsqit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otmsqit"))
        .args(args)
        .env_remove("OTMSQIT_CONFIG_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON report")
}

#[test]
fn run_recovers_both_pivs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "s.toml", THREE_PARTY);
    let out = otmsqit(&["run", &path]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["status"], "success");
    assert_eq!(report["recovered"], serde_json::json!(["010", "101"]));
    assert_eq!(report["agent_success"], serde_json::json!([true, true]));
}

#[test]
fn run_aborts_under_attack() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{THREE_PARTY}d = 200\n[eve]\nstrategy = \"measure_resend\"\n");
    let out = otmsqit(&["run", &write(dir.path(), "s.toml", &text)]);
    assert_eq!(out.status.code(), Some(2));
    let report = json(&out);
    assert_eq!(report["status"], "aborted");
    assert!(report.get("recovered").is_none());
    assert_eq!(report["validation"]["verdict"], "fail");
}

#[test]
fn parse_and_usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "pivs = [\"010\", \"10a\"]\n");
    let out = otmsqit(&["run", &bad]);
    assert_eq!(out.status.code(), Some(64));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1") && err.contains("10a"), "{err}");

    let unknown = write(dir.path(), "u.toml", "pivs = [\"0\"]\nseeds = 3\n");
    assert_eq!(otmsqit(&["run", &unknown]).status.code(), Some(64));
    assert_eq!(otmsqit(&["run", "/definitely/missing.toml"]).status.code(), Some(64));
    assert_eq!(otmsqit(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(otmsqit(&["run"]).status.code(), Some(64));
    assert_eq!(otmsqit(&["--help"]).status.code(), Some(0));
}

#[test]
fn reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{THREE_PARTY}d = 20\n[eve]\nstrategy = \"intercept_replace\"\nk = 1\n");
    let path = write(dir.path(), "s.toml", &text);
    let a = otmsqit(&["run", &path, "--seed", "3"]);
    let b = otmsqit(&["run", &path, "--seed", "3"]);
    assert_eq!(a.stdout, b.stdout);

    let csv_a = dir.path().join("a.csv");
    let csv_b = dir.path().join("b.csv");
    let ea = otmsqit(&["experiment", &path, "--trials", "50", "--output", csv_a.to_str().unwrap()]);
    let eb = otmsqit(&["experiment", &path, "--trials", "50", "--output", csv_b.to_str().unwrap()]);
    assert_eq!(ea.status.code(), Some(0));
    assert_eq!(ea.stdout, eb.stdout);
    assert_eq!(std::fs::read(&csv_a).unwrap(), std::fs::read(&csv_b).unwrap());
}

#[test]
fn experiment_rates_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let text = "pivs = [\"010\", \"101\"]\nd = 1\nseed = 5\n[eve]\nstrategy = \"measure_resend\"\nk = 1\n";
    let path = write(dir.path(), "s.toml", text);
    let csv = dir.path().join("t.csv");
    let out = otmsqit(&["experiment", &path, "--trials", "10000", "--output", csv.to_str().unwrap()]);
    let stats = &json(&out)["stats"];
    let rate = stats["attacked_qubit_error_rate"]["value"].as_f64().unwrap();
    assert!((rate - 0.5).abs() <= 0.02, "{rate}");

    let rows = std::fs::read_to_string(&csv).unwrap();
    let mut lines = rows.lines();
    assert_eq!(lines.next(), Some("trial,errors,decoy_checks,verdict,eve_bit_accuracy"));
    assert_eq!(lines.count(), 10_000);

    let honest = write(dir.path(), "h.toml", THREE_PARTY);
    let out = otmsqit(&["experiment", &honest, "--trials", "200"]);
    assert_eq!(json(&out)["stats"]["abort_rate"]["value"].as_f64(), Some(0.0));

    let ir = "pivs = [\"10\", \"01\", \"11\"]\nd = 5\nseed = 9\n[eve]\nstrategy = \"intercept_replace\"\nk = 3\n";
    let out = otmsqit(&["experiment", &write(dir.path(), "ir.toml", ir), "--trials", "2000"]);
    let tuple = json(&out)["stats"]["attacked_tuple_error_rate"]["value"].as_f64().unwrap();
    assert!((tuple - 0.875).abs() <= 0.02, "{tuple}");
}

#[test]
fn distribution_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = otmsqit(&["distribution", &write(dir.path(), "s.toml", THREE_PARTY)]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("outcome,probability"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4096);
    assert!(rows.iter().all(|r| r.ends_with(",0.000244140625")));
    assert!(rows.contains(&"111111 100111 110010,0.000244140625"));
    let mut sorted = rows.clone();
    sorted.sort();
    assert_eq!(sorted, rows);

    let out = otmsqit(&["distribution", &write(dir.path(), "z.toml", "pivs = [\"0\"]\n")]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "outcome,probability\n0 0,0.5\n1 1,0.5\n");

    let big = format!("pivs = [\"{}\", \"{}\"]\n", "1".repeat(12), "0".repeat(12));
    let out = otmsqit(&["distribution", &write(dir.path(), "big.toml", &big)]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("analytic sampling"));
}

#[test]
fn config_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "named.toml", THREE_PARTY);
    let out = Command::new(env!("CARGO_BIN_EXE_otmsqit"))
        .args(["run", "named.toml"])
        .current_dir(std::env::temp_dir())
        .env("OTMSQIT_CONFIG_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn oracle_check_passes() {
    let out = otmsqit(&["oracle-check", "--trials", "5", "--samples", "20000", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.ends_with("5 of 5 cases passed\n"), "{text}");
}
