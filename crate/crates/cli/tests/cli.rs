use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = "\
roster = color:cyclic:3,shape:categorical:3,pos_x:ordinal:4
split = rand:0.5
seeds = 2
aug_iters = 100
pred_iters = 100
aug_hidden = 8
pred_hidden = 8
batch = 4
law_images = 16
law_tuples = 8
";

fn edt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edt")).arg("--out").arg(dir).args(args).output().expect("spawn edt")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = edt(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn tiny() -> (TempDir, String) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    ok(dir.path(), &["--config", &cfg, "gen"]);
    (dir, cfg)
}

#[test]
fn gen_writes_full_grid_reproducibly() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["gen"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("wrote 2880 instances"));
    let first = fs::read(dir.path().join("dataset.edt1")).unwrap();
    ok(dir.path(), &["gen"]);
    assert_eq!(first, fs::read(dir.path().join("dataset.edt1")).unwrap());
    assert!(fs::read_to_string(dir.path().join("gen.config.txt")).unwrap().starts_with("# digest "));
}

#[test]
fn verify_algebra_passes_on_default_roster() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("c.cfg");
    fs::write(&cfg, "law_tuples = 16\n").unwrap();
    let out = ok(dir.path(), &["--config", cfg.to_str().unwrap(), "verify-algebra"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("shapexscale: restricted image"), "{text}");
    assert!(dir.path().join("algebra.txt").exists());
}

#[test]
fn corrupted_action_file_exits_with_law_code() {
    let dir = TempDir::new().unwrap();
    // C2 acting on two points, with the generator sent to a constant map.
    let good = "MONOID 2 0\n0 1\n1 0\nACTION 2\n0 1\n1 0\n";
    let bad = "MONOID 2 0\n0 1\n1 0\nACTION 2\n0 1\n0 0\n";
    fs::write(dir.path().join("good.txt"), good).unwrap();
    fs::write(dir.path().join("bad.txt"), bad).unwrap();
    ok(dir.path(), &["verify-algebra", "--algebra", dir.path().join("good.txt").to_str().unwrap()]);
    let out = edt(dir.path(), &["verify-algebra", "--algebra", dir.path().join("bad.txt").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(fs::read_to_string(dir.path().join("algebra.txt")).unwrap().contains("witness"));
}

#[test]
fn config_and_missing_artifact_exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "learning_rate = 0.1\n").unwrap();
    assert_eq!(edt(dir.path(), &["--config", cfg.to_str().unwrap(), "gen"]).status.code(), Some(3));
    assert_eq!(edt(dir.path(), &["train-aug", "--split", "diagonal"]).status.code(), Some(3));
    assert_eq!(edt(dir.path(), &["--config", "/nonexistent.cfg", "gen"]).status.code(), Some(4));
    assert_eq!(edt(dir.path(), &["eval"]).status.code(), Some(4));
    assert_eq!(edt(dir.path(), &["frobnicate"]).status.code(), Some(3));
}

#[test]
fn erm_arm_equals_edt_with_every_weight_zeroed() {
    let (dir, cfg) = tiny();
    let d = dir.path();
    ok(d, &["--config", &cfg, "train-pred", "--arm", "erm"]);
    let erm = fs::read(d.join("predictor.edtp")).unwrap();
    ok(d, &["--config", &cfg, "train-pred", "--arm", "edt", "--l0", "0", "--l1", "0", "--l2", "0", "--l3", "0", "--no-aug"]);
    assert_eq!(erm, fs::read(d.join("predictor.edtp")).unwrap());
}

#[test]
fn pipeline_is_byte_reproducible() {
    let (dir, cfg) = tiny();
    let d = dir.path();
    let run = |name: &str, args: &[&str]| {
        let mut full = vec!["--config", cfg.as_str()];
        full.extend_from_slice(args);
        ok(d, &full);
        fs::read(d.join(name)).unwrap()
    };
    let aug = run("augmenters.edta", &["train-aug"]);
    assert_eq!(aug, run("augmenters.edta", &["train-aug"]));
    run("predictor.edtp", &["train-pred"]);
    let metrics = run("metrics.jsonl", &["eval"]);
    assert_eq!(metrics, run("metrics.jsonl", &["eval"]));
    let text = String::from_utf8(metrics).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.contains("\"config_digest\""));
    let laws = run("laws.json", &["law-report"]);
    assert_eq!(laws, run("laws.json", &["law-report"]));
    assert_eq!(run("train-aug.log.jsonl", &["train-aug"]).split(|&b| b == b'\n').filter(|l| !l.is_empty()).count(), 1);
}

#[test]
fn ablation_is_byte_reproducible() {
    let (dir, cfg) = tiny();
    let d = dir.path();
    let args = ["--config", cfg.as_str(), "ablate", "--arms", "erm,oracle"];
    ok(d, &args);
    let (runs, table) = (fs::read(d.join("runs.jsonl")).unwrap(), fs::read_to_string(d.join("table.txt")).unwrap());
    ok(d, &args);
    assert_eq!(runs, fs::read(d.join("runs.jsonl")).unwrap());
    assert_eq!(table, fs::read_to_string(d.join("table.txt")).unwrap());
    assert!(table.contains("EDT-oracle") && !table.contains("failed"), "{table}");
    assert_eq!(String::from_utf8(runs).unwrap().lines().count(), 2);
}

#[test]
fn dataset_from_another_roster_is_rejected() {
    let (dir, _) = tiny();
    assert_eq!(edt(dir.path(), &["train-pred", "--arm", "erm"]).status.code(), Some(3));
}
