//! Black-box tests of the installed binary: exit codes, wire formats, and
//! determinism across worker counts and repeated invocations.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_auctionlab");

const OVERLAP_INSTANCE: &str = r#"{
  "bidders": [
    {"arrival": "0", "departure": "10", "value": "9"},
    {"arrival": "1", "departure": "2", "value": "3"},
    {"arrival": "3", "departure": "4", "value": "5"},
    {"arrival": "5", "departure": "6", "value": "2"}
  ],
  "tie_break": [0, 1, 2, 3]
}"#;

fn instance_file(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("instance.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run_cli(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout_str(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr_str(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

#[test]
fn run_reports_the_outcome_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = instance_file(&dir, OVERLAP_INSTANCE);
    let out = run_cli(&[
        "run",
        "--instance",
        path.to_str().unwrap(),
        "--alpha",
        "1/2",
        "--prediction",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["outcome"]["winner"], 0);
    assert_eq!(report["outcome"]["price"], "5/1");
    assert_eq!(report["prediction_priced"], true);
    assert!(report.get("trace").is_none(), "trace is opt-in");
}

#[test]
fn instances_can_be_piped_through_stdin() {
    let mut child = Command::new(BIN)
        .args(["eval", "exact", "--instance", "-", "--alpha", "1/2", "--prediction", "8"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(OVERLAP_INSTANCE.as_bytes())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["expected_revenue"], "21/4");
}

#[test]
fn malformed_instances_exit_with_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = instance_file(&dir, "{\"bidders\": []}");
    let out = run_cli(&[
        "run",
        "--instance",
        path.to_str().unwrap(),
        "--alpha",
        "1/2",
        "--prediction",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).starts_with("error:"));
}

#[test]
fn zero_denominators_exit_with_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = instance_file(&dir, OVERLAP_INSTANCE);
    let out = run_cli(&[
        "run",
        "--instance",
        path.to_str().unwrap(),
        "--alpha",
        "1/0",
        "--prediction",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("zero denominator"));
}

#[test]
fn unknown_subcommands_exit_with_a_usage_error() {
    let out = run_cli(&["bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn found_deviations_exit_with_a_violation() {
    let dir = tempfile::tempdir().unwrap();
    let path = instance_file(&dir, OVERLAP_INSTANCE);
    let out = run_cli(&[
        "audit",
        "--instance",
        path.to_str().unwrap(),
        "--alpha",
        "1/2",
        "--prediction",
        "8",
        "--payment-rule",
        "rerun-disabled",
    ]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_str(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["truthful_dominates"], false);
    assert_eq!(report["witness"]["bidder"], 0);

    // The standard payment rule on the same market is deviation-free.
    let out = run_cli(&[
        "audit",
        "--instance",
        path.to_str().unwrap(),
        "--alpha",
        "1/2",
        "--prediction",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
}

#[test]
fn output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let path = instance_file(&dir, OVERLAP_INSTANCE);
    let args = |workers: &'static str| {
        vec![
            "--workers",
            workers,
            "eval",
            "exact",
            "--instance",
            path.to_str().unwrap(),
            "--alpha",
            "1/2",
            "--prediction",
            "8",
            "--distribution",
        ]
    };
    let one = run_cli(&args("1"));
    let two = run_cli(&args("2"));
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(two.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout, "stdout must not depend on parallelism");
}

#[test]
fn monte_carlo_is_reproducible_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = instance_file(&dir, OVERLAP_INSTANCE);
    let args = [
        "eval",
        "mc",
        "--instance",
        path.to_str().unwrap(),
        "--alpha",
        "1/2",
        "--prediction",
        "8",
        "--trials",
        "500",
        "--seed",
        "11",
    ];
    let first = run_cli(&args);
    let second = run_cli(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn sweep_emits_one_csv_row_per_grid_alpha() {
    let out = run_cli(&["sweep", "--n", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_str(&out);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("n,alpha,"));
    // Exact milestone grid at n = 6: 0, 1/3, 2/3, 1.
    assert_eq!(lines.count(), 4);
    assert!(stderr_str(&out).contains("skipped"));
}

#[test]
fn enumeration_caps_are_enforced_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = instance_file(&dir, OVERLAP_INSTANCE);
    let out = Command::new(BIN)
        .env("AUCTIONLAB_CAP", "3")
        .args([
            "eval",
            "exact",
            "--instance",
            path.to_str().unwrap(),
            "--alpha",
            "1/2",
            "--prediction",
            "8",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_str(&out).contains("cap"));
}

#[test]
fn certificate_commands_report_frozen_values() {
    let out = run_cli(&["lp", "dual", "--n", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let cert: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(cert["objective"], "3/10");
    assert_eq!(cert["bound_holds"], true);

    let out = run_cli(&["lp", "rule", "--stop", "0,1,1", "--enumerate"]);
    assert_eq!(out.status.code(), Some(0));
    let stats: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(stats["success_probability"], "1/3");
    assert_eq!(stats["enumeration_matches"], true);
}

#[test]
fn family_scans_pass_on_small_markets() {
    let out = run_cli(&["family", "hardness", "--n", "4", "--alpha", "1/2"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_str(&out));
    let scan: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(scan["violations"].as_array().unwrap().len(), 0);

    let out = run_cli(&["family", "interchange", "--rules", "m,p,n", "--index", "1"]);
    assert_eq!(out.status.code(), Some(0));
}
