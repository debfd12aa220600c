//! End-to-end checks of the installed binary: artifact layout, exit codes,
//! and byte-level reproducibility, driven exactly like a user would drive
//! the tool.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gridsgd(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridsgd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_accurate_reproducible_artifacts() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "run.json",
        r#"{
            "dataset": "breast-cancer",
            "algorithm": {"name": "sgd"},
            "solver": {"batch_size": 16, "step_size": 1.0, "iterations": 1000, "trace_interval": 100},
            "output_dir": "out"
        }"#,
    );
    let out = gridsgd(tmp.path(), &["run", "run.json"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/summary.json")).unwrap())
            .unwrap();
    let objective = summary["final_objective"].as_f64().unwrap();
    let accuracy = summary["training_accuracy"].as_f64().unwrap();
    assert!(objective < 0.35, "objective {objective}");
    assert!(accuracy > 0.9, "accuracy {accuracy}");
    let checksum = summary["x_checksum_sha256"].as_str().unwrap();
    assert_eq!(checksum.len(), 64);
    assert!(checksum.chars().all(|c| c.is_ascii_hexdigit()));

    let first_trace = fs::read(tmp.path().join("out/trace.csv")).unwrap();
    let first_ledger = fs::read(tmp.path().join("out/ledger.csv")).unwrap();
    let first_summary = fs::read(tmp.path().join("out/summary.json")).unwrap();

    let again = gridsgd(tmp.path(), &["run", "run.json"]);
    assert_eq!(exit_code(&again), 0);
    assert_eq!(fs::read(tmp.path().join("out/trace.csv")).unwrap(), first_trace);
    assert_eq!(fs::read(tmp.path().join("out/ledger.csv")).unwrap(), first_ledger);
    assert_eq!(fs::read(tmp.path().join("out/summary.json")).unwrap(), first_summary);
}

#[test]
fn invalid_hybrid_shape_fails_before_any_compute() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "bad.json",
        r#"{
            "dataset": "breast-cancer",
            "algorithm": {"name": "hybrid", "rows": 2, "cols": 2},
            "solver": {"batch_size": 16, "step_size": 0.5, "iterations": 40, "block_len": 8, "local_iters": 4},
            "output_dir": "out"
        }"#,
    );
    let out = gridsgd(tmp.path(), &["run", "bad.json"]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr(&out).contains("solver.local_iters"),
        "error should name the field: {}",
        stderr(&out)
    );
    assert!(!tmp.path().join("out").exists(), "no artifacts on validation failure");
}

#[test]
fn diverging_run_exits_3_and_keeps_the_partial_trace() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "div.json",
        r#"{
            "dataset": {"synthetic": {"rows": 64, "cols": 8, "nnz_per_row": 4}},
            "algorithm": {"name": "sgd"},
            "solver": {"batch_size": 8, "step_size": 1e308, "iterations": 20, "trace_interval": 1},
            "output_dir": "out"
        }"#,
    );
    let out = gridsgd(tmp.path(), &["run", "div.json"]);
    assert_eq!(exit_code(&out), 3, "stderr: {}", stderr(&out));
    assert!(tmp.path().join("out/trace.csv").exists(), "partial trace kept");
    assert!(!tmp.path().join("out/summary.json").exists(), "no summary for a blown-up run");
}

#[test]
fn io_and_validation_failures_use_their_exit_codes() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(exit_code(&gridsgd(tmp.path(), &["run", "missing.json"])), 4);

    write_config(tmp.path(), "unk.json", r#"{"dataset": "nosuch", "algorithm": {"name": "sgd"}}"#);
    let out = gridsgd(tmp.path(), &["run", "unk.json"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("unknown name"));

    assert_eq!(exit_code(&gridsgd(tmp.path(), &["fetch", "nosuch"])), 2);
    assert_eq!(exit_code(&gridsgd(tmp.path(), &["figure", "nosuch"])), 2);
    let out = gridsgd(tmp.path(), &["figure", "gd-vs-sgd", "--param", "bogus=1"]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("unknown param"));
}

fn final_objective(csv: &str) -> f64 {
    let last = csv.trim_end().lines().last().unwrap();
    last.split(',').nth(2).unwrap().parse().unwrap()
}

#[test]
fn gd_vs_sgd_bundle_has_the_stochastic_curve_on_top() {
    let tmp = TempDir::new().unwrap();
    let out = gridsgd(
        tmp.path(),
        &["figure", "gd-vs-sgd", "--param", "dataset=breast-cancer", "--param", "passes=3"],
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let dir = tmp.path().join("out/gd-vs-sgd");
    let gd = fs::read_to_string(dir.join("gd.csv")).unwrap();
    let sgd = fs::read_to_string(dir.join("sgd.csv")).unwrap();
    assert!(gd.starts_with("iteration,gradient_evaluations,objective"));
    assert!(
        final_objective(&sgd) <= final_objective(&gd) + 1e-6,
        "sgd {} vs gd {}",
        final_objective(&sgd),
        final_objective(&gd)
    );
}

#[test]
fn sweep_emits_the_full_grid_and_names_an_interior_best() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "sweep.json",
        r#"{
            "total_ranks": 32,
            "block_lens": [1, 2, 4, 8, 16],
            "row_counts": [1, 2, 4, 8, 16],
            "mode": "derived",
            "params": {
                "num_rows": 4096, "num_cols": 512, "nnz_per_row": 16.0,
                "batch_size": 16, "iterations": 512, "local_iters": 16,
                "cost": {"alpha": 1e-3, "beta": 1e-7, "gamma": 1e-11, "transcendental_weight": 4.0}
            }
        }"#,
    );
    let out = gridsgd(tmp.path(), &["sweep", "sweep.json"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("out/sweep.csv")).unwrap();
    assert!(csv.starts_with("algorithm,s,tau,p_r,p_c,F,W,L,modeled_time,speedup"));
    assert_eq!(csv.trim_end().lines().count(), 26, "header plus 5x5 cells");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("best: hybrid-sgd"), "stdout: {stdout}");
}
