//! Black-box tests of the `adagpr` binary: exit codes, artifact handling,
//! and the per-command error paths.

use std::path::Path;
use std::process::{Command, Output};

use adagpr::data::{generate_heterophilous, generate_sbm, write_dataset};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adagpr"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn make_dataset(dir: &Path) {
    let dataset = generate_sbm(15, 2, 0.4, 0.05, 4, 0.3, 3).unwrap();
    write_dataset(&dataset, dir).unwrap();
}

#[test]
fn help_exits_zero_everywhere() {
    for args in [
        vec!["--help"],
        vec!["train", "--help"],
        vec!["coeffs", "--help"],
        vec!["spectrum", "--help"],
        vec!["bound", "--help"],
        vec!["gen", "--help"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{args:?}");
    }
}

#[test]
fn unknown_flag_exits_two() {
    let out = bin().args(["train", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["explode"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_validation_error_exits_two() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    // alpha outside (0,1).
    let out = run_in(
        work.path(),
        &[
            "train", "--dataset", "ds", "--model", "adagpr", "--alpha", "1.5", "--split",
            "random", "--out", "run",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    // Missing dataset directory.
    let out = run_in(
        work.path(),
        &["train", "--dataset", "nowhere", "--out", "run"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_divergence_exits_three() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    // A learning rate near the f64 overflow edge reliably produces a
    // non-finite loss on the second epoch (Adam steps are ~lr-sized, and
    // the layer products then overflow).
    let out = run_in(
        work.path(),
        &[
            "train",
            "--dataset",
            "ds",
            "--model",
            "gcn",
            "--layers",
            "2",
            "--hidden",
            "8",
            "--lr",
            "1e200",
            "--epochs",
            "60",
            "--patience",
            "60",
            "--split",
            "random",
            "--out",
            "run",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn refuses_to_overwrite_without_force() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    let args = [
        "train", "--dataset", "ds", "--model", "gcn", "--layers", "2", "--hidden", "4",
        "--epochs", "5", "--patience", "5", "--split", "random", "--out", "run",
    ];
    assert_eq!(run_in(work.path(), &args).status.code(), Some(0));
    assert_eq!(run_in(work.path(), &args).status.code(), Some(2));
    let mut with_force: Vec<&str> = args.to_vec();
    with_force.push("--force");
    assert_eq!(run_in(work.path(), &with_force).status.code(), Some(0));
}

#[test]
fn coefficients_trace_rows_sum_to_one() {
    let work = tempfile::tempdir().unwrap();
    let hetero = generate_heterophilous(40, 4, 1).unwrap();
    write_dataset(&hetero, &work.path().join("ds")).unwrap();
    let out = run_in(
        work.path(),
        &[
            "train", "--dataset", "ds", "--model", "adagpr", "--layers", "4", "--k", "2",
            "--hidden", "8", "--epochs", "30", "--patience", "30", "--split", "random",
            "--out", "run",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(work.path().join("run/coefficients.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let fields: Vec<f64> = line
            .split(',')
            .skip(2)
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(fields.len(), 2);
        let sum: f64 = fields.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "row '{line}' sums to {sum}");
        rows += 1;
    }
    assert!(rows > 0);

    // The final table prints one row per layer, all on the simplex.
    let out = run_in(work.path(), &["coeffs", "--run", "run"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 5, "{text}");

    // Evolution mode respects --layer.
    let out = run_in(work.path(), &["coeffs", "--run", "run", "--evolution", "--layer", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for line in text.lines().skip(1) {
        assert_eq!(line.split(',').nth(1), Some("2"), "{line}");
    }
}

#[test]
fn coeffs_on_gcn_run_is_missing_trace() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    let out = run_in(
        work.path(),
        &[
            "train", "--dataset", "ds", "--model", "gcn", "--layers", "2", "--hidden", "4",
            "--epochs", "5", "--patience", "5", "--split", "random", "--out", "run",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(!work.path().join("run/coefficients.csv").exists());
    let out = run_in(work.path(), &["coeffs", "--run", "run"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run_in(work.path(), &["coeffs", "--run", "run", "--evolution"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn frozen_uniform_run_reports_uniform_rows() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    let out = run_in(
        work.path(),
        &[
            "train", "--dataset", "ds", "--model", "adagpr-uniform", "--layers", "2", "--k",
            "4", "--hidden", "8", "--epochs", "10", "--patience", "10", "--split", "random",
            "--out", "run",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let out = run_in(work.path(), &["coeffs", "--run", "run"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for line in text.lines().skip(1) {
        for field in line.split(',').skip(1) {
            assert_eq!(field, "0.2500");
        }
    }
}

#[test]
fn spectrum_writes_csv_and_profile() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    let out = run_in(
        work.path(),
        &["spectrum", "--dataset", "ds", "--kmax", "4", "--out", "spec"],
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(work.path().join("spec/spectrum.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31); // header + 30 nodes
    let profile = std::fs::read_to_string(work.path().join("spec/oversmoothing.csv")).unwrap();
    assert_eq!(profile.lines().count(), 6); // header + k = 0..4
    let first_data = csv.lines().nth(1).unwrap();
    let lambda1: f64 = first_data.split(',').nth(1).unwrap().parse().unwrap();
    assert!((lambda1 - 1.0).abs() < 1e-9);
}

#[test]
fn bound_from_run_writes_report() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    let out = run_in(
        work.path(),
        &[
            "train", "--dataset", "ds", "--model", "adagpr", "--layers", "2", "--k", "2",
            "--hidden", "8", "--epochs", "20", "--patience", "20", "--split", "random",
            "--out", "run",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let out = run_in(work.path(), &["bound", "--run", "run"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(work.path().join("run/bound.json")).unwrap())
            .unwrap();
    assert!(report["complexity_index"].as_f64().unwrap() > 0.0);
    assert!(report["gcnii_comparison"].as_f64().unwrap() > 0.0);
    assert_eq!(report["spectral_sums"].as_array().unwrap().len(), 2);
}

#[test]
fn bound_rejects_gcn_runs() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    let out = run_in(
        work.path(),
        &[
            "train", "--dataset", "ds", "--model", "gcn", "--layers", "2", "--hidden", "4",
            "--epochs", "5", "--patience", "5", "--split", "random", "--out", "run",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let out = run_in(work.path(), &["bound", "--run", "run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bound_dataset_mode_with_mu_file() {
    let work = tempfile::tempdir().unwrap();
    make_dataset(&work.path().join("ds"));
    std::fs::write(work.path().join("mu.json"), "[[0.5,0.5],[1.0,0.0]]").unwrap();
    let out = run_in(
        work.path(),
        &[
            "bound", "--dataset", "ds", "--mu-file", "mu.json", "--alpha", "0.2", "--m", "12",
            "--u", "9",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(work.path().join("bound.json").exists());

    // Without --m/--u and without a split file the command must refuse.
    let out = run_in(
        work.path(),
        &["bound", "--dataset", "ds", "--mu-file", "mu.json", "--force"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_then_train_round_trip() {
    let work = tempfile::tempdir().unwrap();
    let out = run_in(
        work.path(),
        &[
            "gen", "--kind", "heterophilous", "--n", "40", "--dim", "4", "--seed", "2",
            "--out", "ds",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let out = run_in(
        work.path(),
        &[
            "train", "--dataset", "ds", "--model", "gprgnn", "--k", "3", "--hidden", "8",
            "--epochs", "20", "--patience", "20", "--split", "random", "--out", "run",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    // gprgnn records its single global coefficient vector as layer 1.
    let out = run_in(work.path(), &["coeffs", "--run", "run"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 2, "{text}");
}

#[test]
fn gen_rejects_bad_kind() {
    let work = tempfile::tempdir().unwrap();
    let out = run_in(work.path(), &["gen", "--kind", "mystery", "--out", "ds"]);
    assert_eq!(out.status.code(), Some(2));
}
