use std::fs;
use std::process::{Command, Output};

fn fairshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairshare")).args(args).output().expect("binary runs")
}

#[test]
fn run_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let trace = dir.path().join("trace.jsonl");
    let out =
        fairshare(&["run", "--case", "ii", "--report", report.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["case"], "II");
    assert_eq!(r["passed"], true);
    let lines = fs::read_to_string(&trace).unwrap();
    assert!(lines.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));
}

#[test]
fn bad_configuration_exits_2() {
    let out = fairshare(&["run", "--file-size", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("file_size"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "unknown_key = true\n").unwrap();
    assert_eq!(fairshare(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn cases_prints_the_table() {
    let out = fairshare(&["cases"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    let honest = text.lines().find(|l| l.starts_with("honest")).unwrap();
    assert!(honest.contains("+320") && honest.contains("+1030") && honest.contains("-1350"), "{honest}");
}

#[test]
fn gas_schedule_override_changes_totals() {
    let dir = tempfile::tempdir().unwrap();
    let gas = dir.path().join("gas.toml");
    let functions = [
        "register_params",
        "judge_create",
        "register_fog",
        "register_cloud",
        "register_client",
        "store_meta1",
        "store_nonce",
        "store_access_policy",
        "update_access_policy",
        "store_meta2",
        "compare_access_policy",
        "verify_key_hash",
        "lock_p3",
        "lock_p4",
        "reclaim_p3",
        "judge_accept",
        "judge_reveal_key",
        "judge_decide",
        "judge_complain",
        "judge_timeout_claim",
        "judge_abort",
        "judge_refund",
        "transfer",
    ];
    let mut text = String::from("gas_price = 1\n[calls]\n");
    for f in functions {
        text += &format!("{f} = 10\n");
    }
    fs::write(&gas, text).unwrap();
    let out = fairshare(&["run", "--gas-schedule", gas.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["gas"]["total"], 180);
}

#[test]
fn sweep_reports_points() {
    let out = fairshare(&["sweep", "--sizes", "1024,2048", "--clients", "1,2,3"]);
    assert_eq!(out.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["points"].as_array().unwrap().len(), 6);
    assert_eq!(r["passed"], true);
}
