//! End-to-end tests of the `tenrank` binary: subcommand behavior, file
//! artifacts, exit codes (0 success, 1 runtime/I/O, 2 usage), and
//! reproducibility of logged seeds.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tenrank"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn synth_writes_tensor_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "synth", "--rank", "4", "--dims", "4,4,4", "--seed", "7", "--out", "t.tns",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("t.tns").exists());
    assert!(dir.path().join("t.truth").exists());
    assert!(stdout(&out).contains("rank 4"));
}

#[test]
fn synth_missing_rank_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["synth", "--dims", "4,4,4", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_two_value_dims_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["synth", "--rank", "2", "--dims", "4,4", "--seed", "7"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synth_without_seed_logs_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["synth", "--rank", "2", "--dims", "3,3,3", "--out", "t.tns"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("seed:"),
        "auto-generated seed must be printed"
    );
}

#[test]
fn scan_prints_four_decisions_with_holdout() {
    let dir = tempfile::tempdir().unwrap();
    let synth = run_in(
        dir.path(),
        &[
            "synth", "--rank", "3", "--dims", "6,6,6", "--seed", "11", "--out", "t.tns",
        ],
    );
    assert_eq!(synth.status.code(), Some(0));
    let out = run_in(
        dir.path(),
        &[
            "scan",
            "--input",
            "t.tns",
            "--max-rank",
            "6",
            "--holdout",
            "0.1",
            "--seed",
            "3",
            "--csv",
            "scan.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for method in ["AUTOTEN ", "AUTOTEN_REC", "AUTOTEN_MV", "BASELINE1"] {
        assert!(text.contains(method.trim()), "missing {method} in:\n{text}");
    }
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(csv.starts_with("rank,fit_error,corcondia,rmse_holdout,iterations,converged\n"));
    assert!(csv.contains("# method=BASELINE1 chosen_rank="));
}

#[test]
fn scan_without_holdout_skips_mv() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "synth", "--rank", "2", "--dims", "4,4,4", "--seed", "5", "--out", "t.tns",
        ],
    );
    let out = run_in(
        dir.path(),
        &["scan", "--input", "t.tns", "--max-rank", "4", "--seed", "2"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("AUTOTEN_MV   skipped (no holdout)"));
}

#[test]
fn scan_missing_input_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "scan",
            "--input",
            "nope.tns",
            "--max-rank",
            "3",
            "--seed",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn decompose_and_corcondia_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "synth", "--rank", "2", "--dims", "5,5,5", "--seed", "9", "--out", "t.tns",
        ],
    );
    let dec = run_in(
        dir.path(),
        &[
            "decompose",
            "--input",
            "t.tns",
            "--rank",
            "2",
            "--seed",
            "4",
            "--out",
            "m.fac",
        ],
    );
    assert_eq!(dec.status.code(), Some(0));
    assert!(stdout(&dec).contains("relative error"));
    let cc = run_in(
        dir.path(),
        &["corcondia", "--input", "t.tns", "--model", "m.fac"],
    );
    assert_eq!(cc.status.code(), Some(0));
    let text = stdout(&cc);
    let score: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("corcondia: "))
        .expect("score line")
        .parse()
        .unwrap();
    assert!((score - 100.0).abs() < 1e-3, "exact model scored {score}");
}

#[test]
fn corcondia_requires_model_or_rank() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "synth", "--rank", "2", "--dims", "3,3,3", "--seed", "2", "--out", "t.tns",
        ],
    );
    let out = run_in(dir.path(), &["corcondia", "--input", "t.tns"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_is_deterministic_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "experiment",
        "--ranks",
        "3",
        "--trials",
        "2",
        "--margin",
        "2",
        "--seed",
        "21",
        "--out",
    ];
    let o1 = run_in(dir.path(), &[&args[..], &["run1"]].concat());
    assert_eq!(
        o1.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o1.stderr)
    );
    let o2 = run_in(dir.path(), &[&args[..], &["run2"]].concat());
    assert_eq!(o2.status.code(), Some(0));
    let table = |o: &Output| -> Vec<String> {
        stdout(o)
            .lines()
            .filter(|l| !l.contains("run1") && !l.contains("run2"))
            .map(str::to_owned)
            .collect()
    };
    assert_eq!(table(&o1), table(&o2));
    for name in ["accuracy.csv", "trials.csv", "scans.csv"] {
        let a = std::fs::read(dir.path().join("run1").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("run2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }

    let bad = run_in(
        dir.path(),
        &[
            "experiment",
            "--ranks",
            "3",
            "--trials",
            "0",
            "--seed",
            "1",
            "--out",
            "x",
        ],
    );
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn experiment_reads_config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("exp.cfg"),
        "# desk-scale run\nranks=3\ntrials=1\nmargin=2\nnoise=0\nholdout=0.1\nseed=33\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "experiment",
            "--config",
            "exp.cfg",
            "--trials",
            "2",
            "--out",
            "rep",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trials = std::fs::read_to_string(dir.path().join("rep/trials.csv")).unwrap();
    // 1 rank x 2 trials (flag overrides the file's trials=1).
    assert_eq!(trials.lines().count(), 3);
    let accuracy = std::fs::read_to_string(dir.path().join("rep/accuracy.csv")).unwrap();
    assert!(accuracy.contains("# seed=33"));

    let bad = run_in(
        dir.path(),
        &["experiment", "--config", "missing.cfg", "--out", "rep2"],
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn threads_flag_keeps_runs_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    run_in(
        dir.path(),
        &[
            "synth", "--rank", "3", "--dims", "5,5,5", "--seed", "13", "--out", "t.tns",
        ],
    );
    let one = run_in(
        dir.path(),
        &[
            "--threads",
            "1",
            "scan",
            "--input",
            "t.tns",
            "--max-rank",
            "5",
            "--seed",
            "6",
        ],
    );
    let many = run_in(
        dir.path(),
        &[
            "--threads",
            "4",
            "scan",
            "--input",
            "t.tns",
            "--max-rank",
            "5",
            "--seed",
            "6",
        ],
    );
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stdout(&one), stdout(&many));
}
