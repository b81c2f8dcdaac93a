use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gclss(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gclss")).args(args).current_dir(cwd).env_remove("GCLSS_THREADS").output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn small_dataset(dir: &Path) {
    let out = gclss(
        &["gen-data", "--n", "120", "--seed", "4", "--labeled-frac", "0.25", "--train-size", "80", "--val-size", "20", "--test-size", "20", "--out", "d"],
        dir,
    );
    let v = json_of(&out);
    assert_eq!(v["labeled"], 20);
    assert_eq!(v["unlabeled"], 60);
}

const QUICK: [&str; 6] = ["--epochs", "40", "--hidden", "12", "--eval-every", "10"];

#[test]
fn help_and_version_succeed() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(gclss(&["--help"], tmp.path()).status.code(), Some(0));
    assert_eq!(gclss(&["--version"], tmp.path()).status.code(), Some(0));
    assert_eq!(gclss(&["train", "--help"], tmp.path()).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(gclss(&["no-such-command"], tmp.path()).status.code(), Some(1));
    assert_eq!(gclss(&["select"], tmp.path()).status.code(), Some(1));
    assert_eq!(gclss(&["toy-dp", "--seeds", "zero"], tmp.path()).status.code(), Some(1));
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_gclss")).args(["toy-dp", "--seeds", "1"]).env("GCLSS_THREADS", "many").output().unwrap();
    assert_eq!(bad_threads.status.code(), Some(1));
}

#[test]
fn computation_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let out = gclss(&["train", "--data", "missing"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not found"));
    write(tmp.path(), "v.csv", "0,1\n1,0\n");
    assert_eq!(gclss(&["select", "v.csv", "--budget", "3"], tmp.path()).status.code(), Some(2));
}

#[test]
fn seriate_recovers_monotone_order() {
    let tmp = TempDir::new().unwrap();
    let y = [1.0_f64, 5.0, 2.0, 9.0, 3.0];
    let csv: String = y.iter().map(|a| y.iter().map(|b| format!("{}", (-(a - b).abs()).exp())).collect::<Vec<_>>().join(",") + "\n").collect();
    write(tmp.path(), "s.csv", &csv);
    let v = json_of(&gclss(&["seriate", "s.csv"], tmp.path()));
    let ranks: Vec<u64> = v["ranks"].as_array().unwrap().iter().map(|r| r.as_u64().unwrap()).collect();
    let expected = [0, 3, 1, 4, 2];
    let reversed: Vec<u64> = expected.iter().map(|r| 4 - r).collect();
    assert!(ranks == expected || ranks == reversed, "{ranks:?}");
}

#[test]
fn seriate_with_labeled_rows() {
    let tmp = TempDir::new().unwrap();
    // rows 0..3 labeled with y = 0, 1, 2; unlabeled rows have y = 2.5, 0.5
    let y = [0.0_f64, 1.0, 2.0, 2.5, 0.5];
    let csv: String = y.iter().map(|a| y.iter().map(|b| format!("{}", (-(a - b).abs()).exp())).collect::<Vec<_>>().join(",") + "\n").collect();
    write(tmp.path(), "s.csv", &csv);
    write(tmp.path(), "y.csv", "0\n1\n2\n");
    let v = json_of(&gclss(&["seriate", "s.csv", "--labeled", "3", "--labels", "y.csv"], tmp.path()));
    assert_eq!(v["ranks"], serde_json::json!([1, 0]));
    assert_eq!(v["anchor"].as_array().unwrap().len(), 3);
}

#[test]
fn bound_is_zero_without_cross_similarity() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "s.csv", "1,0.5,0,0\n0.5,1,0,0\n0,0,1,0.3\n0,0,0.3,1\n");
    let v = json_of(&gclss(&["bound", "s.csv", "--labeled", "2"], tmp.path()));
    assert_eq!(v["sim_bound"], 0.0);
}

#[test]
fn select_matches_exact_on_small_input() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "v.csv", "0,1,9,9\n1,0,9,9\n9,9,0,1\n9,9,1,0\n");
    let v = json_of(&gclss(&["select", "v.csv", "--budget", "2", "--exact"], tmp.path()));
    assert_eq!(v["indices"].as_array().unwrap().len(), 2);
    assert_eq!(v["cost"], v["exact"]["cost"]);
}

#[test]
fn toy_dp_reports_each_seed() {
    let tmp = TempDir::new().unwrap();
    let out = gclss(&["toy-dp", "--seeds", "5"], tmp.path());
    let v = json_of(&out);
    assert_eq!(v["runs"].as_array().unwrap().len(), 5);
    let mean = v["accuracy"]["mean"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&mean));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(stderr.lines().filter(|l| l.starts_with("seed ")).count(), 5);
    assert!(stderr.contains("mean accuracy"));
}

#[test]
fn robustness_sweep_within_tolerance() {
    let tmp = TempDir::new().unwrap();
    let v = json_of(&gclss(&["robustness-sweep", "--instances", "10", "--trials", "5", "--scale", "1"], tmp.path()));
    assert_eq!(v["changed_instances"], 0);
    assert_eq!(v["unchanged_trials"], 50);
}

#[test]
fn train_eval_round_trip_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    small_dataset(tmp.path());
    let run = |out: &str| {
        let mut args = vec!["train", "--data", "d", "--seed", "2", "--model-out", out, "--metrics", "m.csv"];
        args.extend(QUICK);
        json_of(&gclss(&args, tmp.path()))
    };
    let a = run("a.json");
    let b = run("b.json");
    assert_eq!(a["test_mae"], b["test_mae"]);
    assert_eq!(std::fs::read(tmp.path().join("a.json")).unwrap(), std::fs::read(tmp.path().join("b.json")).unwrap());
    assert_eq!(a["steps"], 40);

    let metrics = std::fs::read_to_string(tmp.path().join("m.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("step,train_loss,val_mae,val_r2"));
    assert_eq!(metrics.lines().count(), 5);

    let e = json_of(&gclss(&["eval", "--data", "d", "--model", "a.json"], tmp.path()));
    assert_eq!(e["mae"], a["test_mae"]);
    assert_eq!(e["count"], 20);
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let tmp = TempDir::new().unwrap();
    small_dataset(tmp.path());
    let mut straight = vec!["train", "--data", "d", "--model-out", "straight.json"];
    straight.extend(QUICK);
    json_of(&gclss(&straight, tmp.path()));

    // a 15-step run checkpoints at step 15; the resumed run finishes the remaining 25
    let mut first = vec!["train", "--data", "d", "--checkpoint", "ck.json", "--checkpoint-every", "15", "--epochs", "15", "--hidden", "12", "--eval-every", "10"];
    first.push("--model-out");
    first.push("partial.json");
    json_of(&gclss(&first, tmp.path()));
    let mut resumed = vec!["train", "--data", "d", "--resume", "ck.json", "--model-out", "resumed.json"];
    resumed.extend(QUICK);
    json_of(&gclss(&resumed, tmp.path()));
    assert_eq!(std::fs::read(tmp.path().join("straight.json")).unwrap(), std::fs::read(tmp.path().join("resumed.json")).unwrap());
}

#[test]
fn flags_override_config_file() {
    let tmp = TempDir::new().unwrap();
    small_dataset(tmp.path());
    write(tmp.path(), "run.toml", "[train]\nepochs = 10\nhidden = 12\neval_every = 5\n");
    let from_file = json_of(&gclss(&["--config", "run.toml", "train", "--data", "d"], tmp.path()));
    assert_eq!(from_file["steps"], 10);
    let overridden = json_of(&gclss(&["--config", "run.toml", "train", "--data", "d", "--epochs", "15"], tmp.path()));
    assert_eq!(overridden["steps"], 15);

    write(tmp.path(), "bad.toml", "[train]\nepoch = 10\n");
    assert_eq!(gclss(&["--config", "bad.toml", "train", "--data", "d"], tmp.path()).status.code(), Some(1));
    write(tmp.path(), "invalid.toml", "[train]\nbudget = 20\n");
    assert_eq!(gclss(&["--config", "invalid.toml", "train", "--data", "d"], tmp.path()).status.code(), Some(1));
}

#[test]
fn experiment_table_has_both_methods() {
    let tmp = TempDir::new().unwrap();
    small_dataset(tmp.path());
    let mut args = vec!["experiment", "--data", "d", "--fractions", "0.25,0.5", "--seeds", "0,1", "--train-size", "80", "--val-size", "20", "--test-size", "20", "--out", "exp.json"];
    args.extend(QUICK);
    let out = gclss(&args, tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("exp.json")).unwrap()).unwrap();
    let table = v["report"]["table"].as_array().unwrap();
    assert_eq!(table.len(), 4);
    for method in ["gclss", "supervised"] {
        assert_eq!(table.iter().filter(|r| r["method"] == method).count(), 2);
    }
    assert_eq!(v["report"]["runs"].as_array().unwrap().len(), 8);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("gclss") && stderr.contains("supervised"));
}
