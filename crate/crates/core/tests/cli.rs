use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
seed = 5
synth.classes = 4
synth.per_class = 30
synth.na_count = 60
run.epochs = 3
run.max_iterations = 2
run.final_pt_epochs = 2
featurizer.hash_dim = 256
model.hidden = 0
";

fn sent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sent"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sent(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.conf"), SMALL).unwrap();
    ok(tmp.path(), &["--config", "run.conf", "--out", "data", "synth"]);
    ok(
        tmp.path(),
        &["--config", "run.conf", "--ratio", "0.3", "corrupt", "data/train.jsonl", "data/noisy.jsonl"],
    );
    tmp
}

#[test]
fn synth_writes_splits_and_labels() {
    let tmp = setup();
    let d = tmp.path().join("data");
    let labels = fs::read_to_string(d.join("labels.txt")).unwrap();
    assert_eq!(labels.lines().count(), 4);
    assert_eq!(labels.lines().next(), Some("NA"));
    let total: usize = ["train", "dev", "test"]
        .iter()
        .map(|n| fs::read_to_string(d.join(format!("{n}.jsonl"))).unwrap().lines().count())
        .sum();
    assert_eq!(total, 60 + 3 * 30);
}

#[test]
fn corrupt_writes_manifest() {
    let tmp = setup();
    let d = tmp.path().join("data");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("noisy.manifest.json")).unwrap()).unwrap();
    let train_len = fs::read_to_string(d.join("train.jsonl")).unwrap().lines().count();
    assert_eq!(manifest["total"], train_len);
    assert_eq!(manifest["corrupted"], (0.3 * train_len as f64).round() as usize);
}

#[test]
fn train_eval_refine_histogram() {
    let tmp = setup();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "--config", "run.conf", "--out", "run", "train", "--train", "data/noisy.jsonl", "--dev",
            "data/dev.jsonl", "--test", "data/test.jsonl", "--labels", "data/labels.txt",
        ],
    );
    let run = dir.join("run");
    let history: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("history.json")).unwrap()).unwrap();
    let iterations = history["iterations"].as_array().unwrap();
    assert!(!iterations.is_empty());
    assert!(history["final_pt"].is_object());
    for rec in iterations {
        let ckpt = rec["checkpoint"].as_str().unwrap();
        assert!(run.join(ckpt).is_file(), "{ckpt}");
    }
    for f in [
        "config.conf",
        "pt_baseline/model.ckpt",
        "sent/model.ckpt",
        "final/model.ckpt",
        "refined_train.jsonl",
        "histograms/pt_baseline.json",
        "histograms/nt_iter1.json",
        "histograms/sent.json",
        "histograms/final_pt.json",
        "test_metrics.json",
        "iter_01/refine_report.json",
    ] {
        assert!(run.join(f).is_file(), "{f}");
    }

    let printed = ok(dir, &["eval", "run/final/model.ckpt", "data/test.jsonl"]);
    let prf: serde_json::Value = serde_json::from_str(&printed).unwrap();
    let f1 = prf["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    ok(
        dir,
        &["--out", "scores", "eval", "run/sent/model.ckpt", "data/test.jsonl", "--refined", "run/refined_train.jsonl"],
    );
    assert!(dir.join("scores/metrics.json").is_file());
    let noise: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("scores/noise_report.json")).unwrap()).unwrap();
    assert!(noise["noise_detection"]["precision"].is_number());

    let said = ok(dir, &["--out", "refined", "refine", "run/iter_01/model.ckpt", "data/noisy.jsonl"]);
    assert!(said.starts_with("kept "));
    assert!(dir.join("refined/refined.jsonl").is_file());
    assert!(dir.join("refined/refine_report.json").is_file());

    let hist = ok(dir, &["histogram", "run/iter_01/model.ckpt", "data/noisy.jsonl", "--bins", "10", "--include-na"]);
    let h: serde_json::Value = serde_json::from_str(&hist).unwrap();
    assert_eq!(h["edges"].as_array().unwrap().len(), 11);
    assert_eq!(h["exclude_na"], false);
}

#[test]
fn saved_config_reproduces_itself() {
    let tmp = setup();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "--config", "run.conf", "--out", "a", "--set", "run.max_iterations=1", "train", "--train",
            "data/noisy.jsonl", "--dev", "data/dev.jsonl",
        ],
    );
    ok(dir, &["--config", "a/config.conf", "--out", "b", "train"]);
    let a = fs::read_to_string(dir.join("a/history.json")).unwrap();
    let b = fs::read_to_string(dir.join("b/history.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(dir.join("a/sent/model.ckpt")).unwrap(),
        fs::read(dir.join("b/sent/model.ckpt")).unwrap()
    );
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sent(tmp.path(), &["train", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]:"));

    let out = sent(tmp.path(), &["--set", "refine.th=2", "--out", "x", "synth"]);
    assert_eq!(out.status.code(), Some(2));

    let out = sent(tmp.path(), &["--set", "no.such.key=1", "synth"]);
    assert_eq!(out.status.code(), Some(2));

    let out = sent(tmp.path(), &["synth"]);
    assert_eq!(out.status.code(), Some(2), "synth without an output directory");
}

#[test]
fn config_errors_name_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.conf"), "seed = 1\n# fine\nrun.k = many\n").unwrap();
    let out = sent(tmp.path(), &["--config", "bad.conf", "--out", "x", "synth"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.conf:3:"), "{err}");
}

#[test]
fn data_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sent(tmp.path(), &["eval", "missing.ckpt", "missing.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[io]:"));

    fs::write(tmp.path().join("junk.ckpt"), b"not a checkpoint").unwrap();
    fs::write(tmp.path().join("empty.jsonl"), b"").unwrap();
    let out = sent(tmp.path(), &["eval", "junk.ckpt", "empty.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[checkpoint]:"));
}

#[test]
fn help_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sent(tmp.path(), &["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("histogram"));
}
