//! Command-line behaviour: subcommands, result files and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odcf-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

const HT: &str = r#"{ "name": "ht_cli", "generator": "ht", "duration_s": 5 }"#;

#[test]
fn run_writes_result_files_and_logs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HT);
    let out = dir.path().join("out");
    let o = cli(&[
        "run", "--config", &cfg, "--out", out.to_str().unwrap(), "--reps", "2",
        "--seed", "3", "--protocol", "odcf", "--protocol", "dcf", "--event-log",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["reps.csv", "flows.csv", "summary.csv", "summary.json", "dcf_rep1.log"] {
        assert!(out.join(format!("ht_cli_{f}")).exists(), "{f}");
    }
    let reps = std::fs::read_to_string(out.join("ht_cli_reps.csv")).unwrap();
    assert_eq!(reps.lines().count(), 1 + 2 * 2);
    assert!(reps.lines().nth(1).unwrap().starts_with("odcf,0,3,"));
    let log = std::fs::read_to_string(out.join("ht_cli_odcf_rep0.log")).unwrap();
    assert_eq!(log.lines().next(), Some("slot,link,event,detail"));
}

#[test]
fn duration_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), HT);
    let out = dir.path().join("out");
    let o = cli(&[
        "run", "--config", &cfg, "--out", out.to_str().unwrap(), "--reps", "1",
        "--duration-s", "1",
    ]);
    assert!(o.status.success());
    let json = std::fs::read_to_string(out.join("ht_cli_summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["duration_s"], 1.0);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), r#"{ "name": "x", "generator": "fc", "params": { "n": 1 } }"#);
    assert_eq!(cli(&["run", "--config", &bad]).status.code(), Some(1));
    let unknown = write_config(dir.path(), r#"{ "name": "x", "generator": "fc", "colour": 1 }"#);
    let o = cli(&["run", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
    assert_eq!(cli(&["run", "--config", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(cli(&["reproduce", "fim9"]).status.code(), Some(1));
    assert_eq!(cli(&["run", "--bogus"]).status.code(), Some(1));
    let cfg = write_config(dir.path(), HT);
    assert_eq!(cli(&["run", "--config", &cfg, "--protocol", "csma"]).status.code(), Some(1));
}

#[test]
fn missed_expectations_exit_with_two() {
    // One short replication is far from steady state, so the proportional
    // split cannot be met.
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&[
        "reproduce", "fim2", "--reps", "1", "--duration-s", "0.5", "--out",
        dir.path().to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL fim2"), "{stdout}");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_prints_both_rate_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "name": "fim", "generator": "fim", "params": { "outer": 2 } }"#);
    let o = cli(&["oracle", "--config", &cfg]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["model"], "raw");
    assert_eq!(v[1]["model"], "overhead_discounted");
    let rates = v[0]["rates_bps"].as_array().unwrap();
    assert!((rates[0].as_f64().unwrap() / rates[1].as_f64().unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn list_scenarios_names_every_case() {
    let o = cli(&["list-scenarios"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["fc_table", "fim2", "mixed_b", "ht_capture", "hetero_mobile", "random"] {
        assert!(text.contains(name), "{name}");
    }
}
