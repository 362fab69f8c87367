//! End-to-end tests of the `ccshap` binary: the ingest/train/audit/verify
//! flow, determinism of emitted artifacts, and the exit-code taxonomy.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccshap"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn fixture_mbox(dir: &Path, name: &str, phishing: bool, count: usize) -> PathBuf {
    let mut content = String::new();
    for i in 0..count {
        let (subject, body) = if phishing {
            (
                format!("urgent notice {i}"),
                format!(
                    "urgent-verify your account password ref-{i} immediately or the account will be suspended today please confirm"
                ),
            )
        } else {
            (
                format!("weekly agenda {i}"),
                format!(
                    "the quarterly report ref-{i} is attached for the project meeting schedule please review before lunch"
                ),
            )
        };
        content.push_str(&format!(
            "From sender{i} Mon Jan 1 00:00:00 2024\nFrom: {}@example.com\nSubject: {subject}\n\n{body}\n\n",
            if phishing { format!("alerts{i}") } else { format!("colleague{i}") }
        ));
    }
    let path = dir.join(name);
    fs::write(&path, content).unwrap();
    path
}

fn ingest_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let phishing = fixture_mbox(dir, "phishing.mbox", true, 12);
    let ham = fixture_mbox(dir, "ham.mbox", false, 12);
    (phishing, ham)
}

#[test]
fn ingest_fixture_mbox_pair_writes_artifacts_and_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (phishing, ham) = ingest_fixture(dir.path());
    let out = dir.path().join("out");

    let output = run(&[
        "ingest",
        "--phishing",
        phishing.to_str().unwrap(),
        "--ham",
        ham.to_str().unwrap(),
        "--format",
        "mbox",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_success(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("phishing=12 ham=12"), "stdout: {stdout}");
    assert!(out.join("train.jsonl").exists());
    assert!(out.join("val.jsonl").exists());
    assert!(out.join("skip_report.jsonl").exists());
}

#[test]
fn ingest_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (phishing, ham) = ingest_fixture(dir.path());

    let mut snapshots = Vec::new();
    for run_dir in ["out1", "out2"] {
        let out = dir.path().join(run_dir);
        let output = run(&[
            "ingest",
            "--phishing",
            phishing.to_str().unwrap(),
            "--ham",
            ham.to_str().unwrap(),
            "--format",
            "mbox",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "5",
        ]);
        assert_success(&output);
        snapshots.push((
            fs::read(out.join("train.jsonl")).unwrap(),
            fs::read(out.join("val.jsonl")).unwrap(),
            fs::read(out.join("skip_report.jsonl")).unwrap(),
        ));
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn missing_input_path_exits_nonzero_with_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "ingest",
        "--phishing",
        "/nonexistent/phish.mbox",
        "--format",
        "mbox",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("/nonexistent/phish.mbox"), "stderr: {stderr}");
}

#[test]
fn unknown_objective_is_a_usage_error_listing_values() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "train",
        "--objective",
        "adversarial",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("bce"), "stderr: {stderr}");
    assert!(stderr.contains("contrastive"));
    assert!(stderr.contains("dpo"));
}

fn full_pipeline(dir: &Path, out: &Path) {
    let (phishing, ham) = ingest_fixture(dir);
    assert_success(&run(&[
        "ingest",
        "--phishing",
        phishing.to_str().unwrap(),
        "--ham",
        ham.to_str().unwrap(),
        "--format",
        "mbox",
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
    ]));
    assert_success(&run(&[
        "train",
        "--objective",
        "bce",
        "--out",
        out.to_str().unwrap(),
        "--epochs",
        "60",
        "--dim",
        "4096",
        "--seed",
        "5",
    ]));
}

#[test]
fn train_bce_reaches_target_and_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    full_pipeline(dir.path(), &out);

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.trim_end().split("\r\n");
    assert_eq!(lines.next().unwrap(), "epoch,train_loss,val_loss,train_acc,val_acc");
    let last = lines.last().unwrap();
    let val_acc: f64 = last.split(',').nth(4).unwrap().parse().unwrap();
    assert!(val_acc >= 0.95, "final val accuracy {val_acc}");
    assert!(out.join("model.bin").exists());
}

#[test]
fn train_dpo_epoch_zero_row_is_ln2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    full_pipeline(dir.path(), &out);

    assert_success(&run(&[
        "train",
        "--objective",
        "dpo",
        "--out",
        out.to_str().unwrap(),
        "--epochs",
        "5",
        "--dim",
        "4096",
        "--model-out",
        out.join("dpo.bin").to_str().unwrap(),
        "--metrics-out",
        out.join("dpo_metrics.csv").to_str().unwrap(),
    ]));
    let metrics = fs::read_to_string(out.join("dpo_metrics.csv")).unwrap();
    let epoch0 = metrics.split("\r\n").nth(1).unwrap();
    let train_loss: f64 = epoch0.split(',').nth(1).unwrap().parse().unwrap();
    assert!((train_loss - std::f64::consts::LN_2).abs() < 1e-6, "epoch-0 loss {train_loss}");
}

#[test]
fn audit_twice_produces_identical_jsonl_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    full_pipeline(dir.path(), &out);

    let mut snapshots = Vec::new();
    for audit_dir in ["audit1", "audit2"] {
        let audit_out = dir.path().join(audit_dir);
        let output = run(&[
            "audit",
            "--corpus",
            out.join("val.jsonl").to_str().unwrap(),
            "--checkpoint",
            out.join("model.bin").to_str().unwrap(),
            "--backend",
            "toy",
            "--out",
            audit_out.to_str().unwrap(),
            "--per-class",
            "1",
            "--n-samples",
            "200",
            "--seed",
            "9",
            "--jobs",
            "2",
        ]);
        assert_success(&output);
        snapshots.push((
            fs::read(audit_out.join("reports.jsonl")).unwrap(),
            fs::read(audit_out.join("summary.csv")).unwrap(),
            fs::read(audit_out.join("reports.txt")).unwrap(),
        ));
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn audit_summary_has_two_rows_for_two_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    full_pipeline(dir.path(), &out);

    let audit_out = dir.path().join("audit");
    let output = run(&[
        "audit",
        "--corpus",
        out.join("val.jsonl").to_str().unwrap(),
        "--checkpoint",
        out.join("model.bin").to_str().unwrap(),
        "--out",
        audit_out.to_str().unwrap(),
        "--per-class",
        "1",
        "--n-samples",
        "100",
    ]);
    assert_success(&output);
    let summary = fs::read_to_string(audit_out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.trim_end().split("\r\n").collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("toy,PHISHING,"));
    assert!(lines[2].starts_with("toy,LEGITIMATE,"));

    let jsonl = fs::read_to_string(audit_out.join("reports.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 2);
}

#[test]
fn audit_score_cache_resumes_without_backend_calls_changing_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    full_pipeline(dir.path(), &out);
    let cache = dir.path().join("scores.log");

    let run_audit = |audit_dir: &str| {
        let audit_out = dir.path().join(audit_dir);
        let output = run(&[
            "audit",
            "--corpus",
            out.join("val.jsonl").to_str().unwrap(),
            "--checkpoint",
            out.join("model.bin").to_str().unwrap(),
            "--out",
            audit_out.to_str().unwrap(),
            "--per-class",
            "1",
            "--n-samples",
            "100",
            "--score-cache",
            cache.to_str().unwrap(),
        ]);
        assert_success(&output);
        fs::read(audit_out.join("reports.jsonl")).unwrap()
    };
    let first = run_audit("audit1");
    assert!(cache.exists());
    let cache_after_first = fs::read_to_string(&cache).unwrap().lines().count();
    let second = run_audit("audit2");
    let cache_after_second = fs::read_to_string(&cache).unwrap().lines().count();
    assert_eq!(first, second);
    assert_eq!(cache_after_first, cache_after_second, "second run must be fully cached");
}

#[test]
fn verify_passes_at_default_samples_and_fails_at_one() {
    let output = run(&["verify", "--n-samples", "2000"]);
    assert_success(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.matches("PASS").count(), 5, "stdout: {stdout}");

    let failing = run(&["verify", "--n-samples", "1", "--seed", "3"]);
    assert_eq!(failing.status.code(), Some(4));
}

#[test]
fn verify_constant_fixture_deviation_is_zero_at_any_n() {
    for n in ["1", "16"] {
        let output = run(&["verify", "--n-samples", n]);
        let stdout = String::from_utf8_lossy(&output.stdout);
        let constant_line = stdout
            .lines()
            .find(|l| l.contains("constant"))
            .expect("constant fixture line");
        assert!(constant_line.contains("max_deviation=0.000000"), "{constant_line}");
    }
}

#[test]
fn missing_checkpoint_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    full_pipeline(dir.path(), &out);
    let output = run(&[
        "audit",
        "--corpus",
        out.join("val.jsonl").to_str().unwrap(),
        "--checkpoint",
        "/nonexistent/model.bin",
        "--out",
        dir.path().join("a").to_str().unwrap(),
        "--per-class",
        "1",
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn config_file_round_trips_through_ingest_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let (phishing, ham) = ingest_fixture(dir.path());
    let out = dir.path().join("out");

    let config_path = dir.path().join("audit.toml");
    fs::write(
        &config_path,
        format!("seed = 5\noutput_dir = {:?}\n", out.to_str().unwrap()),
    )
    .unwrap();

    let output = run(&[
        "ingest",
        "--config",
        config_path.to_str().unwrap(),
        "--phishing",
        phishing.to_str().unwrap(),
        "--ham",
        ham.to_str().unwrap(),
        "--format",
        "mbox",
    ]);
    assert_success(&output);
    assert!(out.join("train.jsonl").exists());
}
