//! Black-box tests of the installed binary: exit codes, error messages and
//! the stability of machine-readable output.

use std::path::Path;
use std::process::{Command, Output};

use remtime::sample::claims_csv;

fn remtime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_remtime"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn missing_inputs_exit_with_code_2() {
    let bad_log = remtime(&["stats", "--log", "/nonexistent/never.csv"]);
    assert_eq!(bad_log.status.code(), Some(2));
    assert!(stderr(&bad_log).contains("/nonexistent/never.csv"));

    let bad_config = remtime(&["run", "--config", "/nonexistent/run.toml"]);
    assert_eq!(bad_config.status.code(), Some(2));
    assert!(stderr(&bad_config).contains("/nonexistent/run.toml"));

    let bad_results = remtime(&[
        "report",
        "--results",
        "/nonexistent/out",
        "--output",
        "/tmp",
    ]);
    assert_eq!(bad_results.status.code(), Some(2));
    assert!(stderr(&bad_results).contains("/nonexistent/out"));
}

#[test]
fn unknown_arguments_exit_with_code_2() {
    let output = remtime(&["stats", "--no-such-flag"]);
    assert_eq!(output.status.code(), Some(2));

    let output = remtime(&["frobnicate"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn help_exits_cleanly() {
    let output = remtime(&["--help"]);
    assert_eq!(output.status.code(), Some(0));
    let text = String::from_utf8_lossy(&output.stdout);
    for subcommand in ["stats", "run", "report", "synth"] {
        assert!(text.contains(subcommand), "help lists {subcommand}");
    }
}

#[test]
fn stats_formats_report_the_same_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let log_path = dir.path().join("claims.csv");
    std::fs::write(&log_path, claims_csv()).unwrap();
    let base = [
        "stats",
        "--log",
        log_path.to_str().unwrap(),
        "--timestamp-format",
        "%d/%m/%Y %H:%M:%S",
    ];

    let csv_out = remtime(
        &base
            .iter()
            .chain(&["--format", "csv"])
            .copied()
            .collect::<Vec<_>>(),
    );
    assert_eq!(csv_out.status.code(), Some(0), "{}", stderr(&csv_out));
    let text = String::from_utf8_lossy(&csv_out.stdout);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), row.len());

    let json_out = remtime(
        &base
            .iter()
            .chain(&["--format", "json"])
            .copied()
            .collect::<Vec<_>>(),
    );
    assert_eq!(json_out.status.code(), Some(0), "{}", stderr(&json_out));
    let json: serde_json::Value = serde_json::from_slice(&json_out.stdout).unwrap();

    assert_eq!(
        row[header.iter().position(|h| *h == "n_cases").unwrap()],
        "2"
    );
    for (name, cell) in header.iter().zip(&row) {
        let from_csv: f64 = cell.parse().unwrap();
        let from_json = json
            .get(name.trim())
            .and_then(|v| v.as_f64())
            .unwrap_or_else(|| panic!("field {name} missing from json"));
        assert_eq!(from_csv, from_json, "field {name}");
    }
}

fn write_summary(dir: &Path, rows: &[&str]) {
    std::fs::create_dir_all(dir).unwrap();
    let mut text =
        String::from("dataset,method,weighted_mae,weighted_std,normalized_mae,mean_rank\n");
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(dir.join("summary.csv"), text).unwrap();
}

#[test]
fn report_requires_at_least_one_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report");
    let output = remtime(&[
        "report",
        "--results",
        dir.path().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("no summary.csv"));
}

#[test]
fn report_rejects_duplicate_descriptors() {
    let dir = tempfile::tempdir().unwrap();
    write_summary(&dir.path().join("a"), &["synth,baseline,100.0,1.0,0.1,1"]);
    write_summary(&dir.path().join("b"), &["synth,baseline,200.0,1.0,0.2,1"]);
    let out = dir.path().join("report");
    let output = remtime(&[
        "report",
        "--results",
        dir.path().to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("duplicate descriptor"));
}

#[test]
fn report_ranks_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    write_summary(
        &dir.path().join("a"),
        &[
            "logA,single_last,100.0,1.0,0.1,1",
            "logA,ts_set,200.0,1.0,0.2,2",
            "logA,baseline,300.0,1.0,0.3,3",
        ],
    );
    write_summary(
        &dir.path().join("b"),
        &[
            "logB,single_last,50.0,1.0,0.1,1",
            "logB,ts_set,80.0,1.0,0.2,2",
            "logB,baseline,90.0,1.0,0.3,3",
        ],
    );
    let report_dir = dir.path().join("report");
    let output = remtime(&[
        "report",
        "--results",
        dir.path().to_str().unwrap(),
        "--output",
        report_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    let report = std::fs::read_to_string(report_dir.join("report.md")).unwrap();
    assert!(report.contains("single_last"));
    assert!(report.contains("Friedman"));
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path_a = dir.path().join("a.csv");
    let path_b = dir.path().join("b.csv");
    let path_c = dir.path().join("c.csv");
    for (path, seed) in [(&path_a, "4"), (&path_b, "4"), (&path_c, "5")] {
        let output = remtime(&[
            "synth",
            "--output",
            path.to_str().unwrap(),
            "--cases",
            "12",
            "--seed",
            seed,
        ]);
        assert_eq!(output.status.code(), Some(0), "{}", stderr(&output));
    }
    let a = std::fs::read(&path_a).unwrap();
    let b = std::fs::read(&path_b).unwrap();
    let c = std::fs::read(&path_c).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
