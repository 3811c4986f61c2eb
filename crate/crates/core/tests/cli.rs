use std::path::Path;
use std::process::{Command, Output};

use hyperdistill::protocol::audit;
use hyperdistill::protocol::transcript::from_text;
use hyperdistill::report::{parse_csv_report, RunReport};

fn hyperdistill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperdistill"))
        .args(args)
        .output()
        .unwrap()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn json_report_to_stdout_parses() {
    let out = hyperdistill(&["--pairs", "200", "--seed", "5"]);
    assert!(out.status.success());
    let report: RunReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.config.pairs, 200);
    assert_eq!(report.counts.phi_class + report.counts.psi_class, 200);
    assert!(report.audit.passed);
    assert!(report.wall_clock_seconds.is_none());
}

#[test]
fn transcript_file_re_audits_clean() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.txt");
    let out = hyperdistill(&["--pairs", "50", "--seed", "11", "--transcript", path_arg(&t)]);
    assert!(out.status.success());
    let transcript = from_text(&std::fs::read_to_string(&t).unwrap()).unwrap();
    assert_eq!(transcript.seed(), 11);
    assert_eq!(transcript.len(), 2 * 50 + 2 * 50 + 50 + 50 + 1);
    assert!(audit(&transcript).passed);
}

#[test]
fn csv_report_has_header_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let r = dir.path().join("r.csv");
    let out = hyperdistill(&["--pairs", "30", "--format", "csv", "--out", path_arg(&r)]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let fields = parse_csv_report(&std::fs::read_to_string(&r).unwrap()).unwrap();
    assert_eq!(fields[0].0, "run_id");
    assert!(fields.iter().any(|(k, v)| k == "pairs" && v == "30"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "pairs = 40\nseed = 3\nfidelities = [0.5, 0.2, 0.2, 0.1]\n").unwrap();
    let out = hyperdistill(&["--config", path_arg(&cfg), "--seed", "4"]);
    assert!(out.status.success());
    let report: RunReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.config.pairs, 40);
    assert_eq!(report.config.seed, 4);
    assert_eq!(report.config.fidelities, [0.5, 0.2, 0.2, 0.1]);
}

#[test]
fn invalid_input_exits_with_usage_error() {
    for args in [
        &["--fidelities", "0.5,0.5,0.5,0.5"][..],
        &["--dephase-p", "1.5"],
        &["--pairs", "0"],
        &["--bogus"],
    ] {
        let out = hyperdistill(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let out = hyperdistill(&["--dephase-p", "1.5"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("dephase_p"));
}

#[test]
fn unwritable_output_is_reported() {
    let out = hyperdistill(&["--pairs", "5", "--out", "/nonexistent-dir/report.json"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/report.json"));
}

#[test]
fn entropy_seed_is_announced() {
    let out = hyperdistill(&["--pairs", "5", "--entropy"]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let seed: u64 = stderr
        .lines()
        .find_map(|l| l.strip_prefix("seed: "))
        .unwrap()
        .parse()
        .unwrap();
    let report: RunReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.config.seed, seed);
}

#[test]
fn timing_is_opt_in() {
    let out = hyperdistill(&["--pairs", "5", "--timing"]);
    let report: RunReport = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report.wall_clock_seconds.is_some());
}

#[test]
fn sweep_reports_every_seed() {
    let out = hyperdistill(&["--pairs", "100", "--seed", "20", "--sweep", "5", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().nth(1).unwrap().starts_with("20,"));
}
