use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn wfblow(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfblow"))
        .args(args)
        .current_dir(dir)
        .env("WFBLOW_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn blowup_point_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = wfblow(
        &["blowup", "--path", "0,1,2", "--point", "0.2,0.3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "0.5 0.6");
    let back = wfblow(
        &[
            "blowup",
            "--path",
            "0,1,2",
            "--point",
            "0.5,0.6",
            "--inverse",
        ],
        dir.path(),
    );
    assert_eq!(stdout(&back).trim(), "0.2 0.3");
}

#[test]
fn blowup_flip_and_chart() {
    let dir = tempfile::tempdir().unwrap();
    let out = wfblow(
        &[
            "blowup", "--path", "0,1,2", "--point", "0.2,0.3", "--flip", "1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "0.5 0.4");
    let chart = wfblow(&["blowup", "--path", "0,1,2,3", "--emit-chart"], dir.path());
    let doc: Value = serde_json::from_str(&stdout(&chart)).unwrap();
    assert_eq!(doc["n"], 3);
    assert!(doc["forward"].is_object() && doc["inverse"].is_object());
    let bad = wfblow(&["blowup", "--path", "0,1,2", "--flip", "2"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn blowup_rewrites_expressions() {
    let dir = tempfile::tempdir().unwrap();
    let out = wfblow(
        &["blowup", "--path", "0,1,2", "--expr", "p1+p2"],
        dir.path(),
    );
    assert_eq!(stdout(&out).trim(), "p1");
}

#[test]
fn op_tables_and_application() {
    let dir = tempfile::tempdir().unwrap();
    let out = wfblow(
        &["op", "--kind", "simplex", "--n", "2", "--expr", "p1*p2"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["coefficients"]["a12"], "-p1*p2");
    assert_eq!(doc["applied"], "-p1*p2");
    let face = wfblow(&["op", "--path", "0,1,2,3", "--face", "2=0"], dir.path());
    let doc: Value = serde_json::from_str(&stdout(&face)).unwrap();
    let keys: Vec<&String> = doc["coefficients"].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["a33"]);
}

#[test]
fn extend_with_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = wfblow(&["extend", "--path", "0,1,2", "--check"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(doc["constraints"]["entries"].as_array().unwrap().len() > 3);
    let custom = wfblow(
        &["extend", "--path", "1,2", "--n", "2", "--expr", "3 + p1"],
        dir.path(),
    );
    assert_eq!(custom.status.code(), Some(0));
    let not_a_solution = wfblow(
        &["extend", "--path", "1,2", "--n", "2", "--expr", "p1^2"],
        dir.path(),
    );
    assert_eq!(not_a_solution.status.code(), Some(2));
}

#[test]
fn solve_example_prints_grid_and_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let out = wfblow(
        &[
            "solve",
            "--n",
            "2",
            "--grid",
            "64",
            "--vertex-data",
            "origin=1",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "p1,p2,u");
    assert_eq!(lines.len(), 65 * 65 + 2);
    let dev: f64 = lines
        .last()
        .unwrap()
        .strip_prefix("max_dev ")
        .unwrap()
        .parse()
        .unwrap();
    assert!(dev <= 1e-8);
    let random = wfblow(
        &[
            "solve",
            "--n",
            "2",
            "--grid",
            "8",
            "--vertex-data",
            "random",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(random.status.code(), Some(0));
    let bad = wfblow(&["solve", "--n", "2", "--vertex-data", "111=1"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["verify", "nonsense", "--n", "2"],
        vec!["blowup", "--path", "0,0,1"],
        vec!["blowup", "--path", "0,1,2", "--point", "0.2"],
        vec!["verify", "roundtrip", "--n", "2", "--tol-scale", "-1"],
    ] {
        assert_eq!(wfblow(&args, dir.path()).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_all_meets_the_example_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "verify", "all", "--n", "3", "--path", "0,1,2,3", "--seed", "7",
    ];
    let first = wfblow(&args, dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    let report = dir.path().join("report.json");
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let passing = doc["cases"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["status"] == "pass")
        .count();
    assert!(passing >= 12, "{passing}");
    let first_hash = digest(&report);
    let second = wfblow(&args, dir.path());
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(digest(&report), first_hash);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"command": "blowup", "path": "0,1,2", "point": [0.2, 0.3]}"#,
    )
    .unwrap();
    let out = wfblow(&["--config", "run.json"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout(&out).trim(), "0.5 0.6");
    let overridden = wfblow(
        &["--config", "run.json", "blowup", "--point", "0.1,0.1"],
        dir.path(),
    );
    assert_eq!(stdout(&overridden).trim(), "0.2 0.5");
    std::fs::write(dir.path().join("bad.json"), "[1, 2]").unwrap();
    assert_eq!(
        wfblow(&["--config", "bad.json"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn report_command_reads_verify_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = wfblow(
        &[
            "verify",
            "roundtrip",
            "--n",
            "2",
            "--points",
            "100",
            "--csv",
            "cases.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let summary = wfblow(&["report"], dir.path());
    assert_eq!(summary.status.code(), Some(0));
    assert!(stdout(&summary).contains("roundtrip: 3 of 3 cases passed"));
    let csv = std::fs::read_to_string(dir.path().join("cases.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let failing = wfblow(
        &[
            "verify",
            "roundtrip",
            "--n",
            "2",
            "--points",
            "100",
            "--tol-scale",
            "0",
        ],
        dir.path(),
    );
    assert_eq!(failing.status.code(), Some(1));
    assert_eq!(wfblow(&["report"], dir.path()).status.code(), Some(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// Exit status is 1 exactly when the written report holds a failing case.
    #[test]
    fn exit_status_follows_the_report(scale_exp in -20i32..2, n in 2usize..4) {
        let dir = tempfile::tempdir().unwrap();
        let scale = format!("{:e}", 10f64.powi(scale_exp));
        let n = n.to_string();
        let out = wfblow(&["verify", "roundtrip", "--n", &n, "--points", "200", "--tol-scale", &scale], dir.path());
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        let failed = doc["cases"].as_array().unwrap().iter().any(|c| c["status"] == "fail");
        prop_assert_eq!(out.status.code(), Some(if failed { 1 } else { 0 }));
        let doc_stdout: Value = serde_json::from_str(&stdout(&out)).unwrap();
        prop_assert_eq!(doc_stdout, doc);
    }
}
