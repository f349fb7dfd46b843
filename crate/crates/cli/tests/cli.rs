use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use polycf::evaluation::{score_user, top_k};
use polycf::synthetic::{block_dataset, BlockConfig};
use polycf::{Checkpoint, FilterSpec, KernelInit};
use tempfile::TempDir;

const QUICK: &[&str] = &["--epochs", "2", "--batch-users", "64", "--seed", "7"];

fn polycf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polycf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn train_into(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec!["train", "--output-dir", out];
    args.extend_from_slice(QUICK);
    args.extend_from_slice(extra);
    ok(polycf(dir, &args));
}

#[test]
fn reruns_are_byte_identical_across_output_dirs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    train_into(d, "a", &[]);
    train_into(d, "b", &["--cache-dir", "other-cache"]);
    let read = |p: &str| fs::read(d.join(p)).unwrap();
    assert_eq!(read("a/checkpoint.json"), read("b/checkpoint.json"));
    assert_eq!(read("a/loss.csv"), read("b/loss.csv"));

    for run in ["a", "b"] {
        let ckpt = format!("{run}/checkpoint.json");
        ok(polycf(
            d,
            &["eval", "--checkpoint", &ckpt, "--output-dir", run],
        ));
    }
    assert_eq!(read("a/metrics.json"), read("b/metrics.json"));
}

#[test]
fn loss_log_has_one_row_per_epoch() {
    let tmp = TempDir::new().unwrap();
    train_into(tmp.path(), "run", &["--epochs", "4"]);
    let log = fs::read_to_string(tmp.path().join("run/loss.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 4);
}

#[test]
fn zero_epochs_stores_the_initial_kernel() {
    let tmp = TempDir::new().unwrap();
    train_into(tmp.path(), "run", &["--epochs", "0"]);
    let stored = Checkpoint::load(tmp.path().join("run/checkpoint.json"))
        .unwrap()
        .kernel::<f64>()
        .unwrap();
    let spec = FilterSpec {
        basis: stored.basis,
        order: stored.order,
        gammas: stored.gammas.clone(),
        omega: 0.0,
        low_pass: None,
        init: KernelInit::JitteredIdentity,
        trainable: true,
    };
    assert_eq!(stored, spec.initial_kernel(0.1, 7).unwrap());
}

#[test]
fn recommend_matches_library_ranking() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    train_into(d, "run", &[]);
    let stdout = ok(polycf(
        d,
        &[
            "recommend",
            "--checkpoint",
            "run/checkpoint.json",
            "--user",
            "5",
            "--output-dir",
            "run",
        ],
    ));
    let listed: Vec<usize> = stdout
        .lines()
        .map(|l| l.split('\t').next().unwrap().parse().unwrap())
        .collect();

    let ds = block_dataset(&BlockConfig {
        seed: 0,
        ..Default::default()
    })
    .unwrap();
    let ckpt = Checkpoint::load(d.join("run/checkpoint.json")).unwrap();
    let low_pass = polycf::truncated_svd::<f64>(&ds.train, ckpt.svd_cutoff, ckpt.svd_seed).unwrap();
    let f = ckpt.filter(Some(low_pass)).unwrap();
    let bank = f.operators(&ds.train).unwrap();
    let scores = score_user(&f, &bank, &ds.train, 5).unwrap();
    assert_eq!(listed, top_k(&scores, 20));
}

#[test]
fn k_zero_recommends_nothing() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    train_into(d, "run", &[]);
    let stdout = ok(polycf(
        d,
        &[
            "recommend",
            "--checkpoint",
            "run/checkpoint.json",
            "--user",
            "0",
            "--k",
            "0",
            "--output-dir",
            "run",
        ],
    ));
    assert!(stdout.is_empty(), "{stdout}");
}

#[test]
fn config_file_is_read_and_flags_win() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("run.conf"),
        "# quick run\nepochs = 3\nbatch_users = 64\n",
    )
    .unwrap();
    ok(polycf(
        d,
        &[
            "--config",
            "run.conf",
            "train",
            "--epochs",
            "1",
            "--output-dir",
            "run",
        ],
    ));
    let resolved = fs::read_to_string(d.join("run/resolved_config")).unwrap();
    assert!(resolved.contains("\nepochs = 1\n"), "{resolved}");
    assert!(resolved.contains("\nbatch_users = 64\n"), "{resolved}");
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("bad.conf"),
        "epochs = 1\nlearning_rate = 0.1\n",
    )
    .unwrap();
    let out = polycf(tmp.path(), &["--config", "bad.conf", "train"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.conf:2"), "{err}");
}

#[test]
fn runtime_failures_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let out = polycf(tmp.path(), &["eval", "--checkpoint", "missing.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = polycf(
        tmp.path(),
        &["train", "--dataset", "nowhere", "--data-dir", "."],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn theorem2_on_a_random_matrix_reports_agreement() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(polycf(
        tmp.path(),
        &["diagnose", "theorem2", "--random", "--output-dir", "out"],
    ));
    assert!(stdout.contains("0 range violations"), "{stdout}");
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/theorem2.json")).unwrap())
            .unwrap();
    assert_eq!(rep["pairs"].as_array().unwrap().len(), 3);
}
