use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn skelgest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skelgest"))
        .args(args)
        .env_remove("SKELGEST_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, patients: &str) -> PathBuf {
    let out = dir.join("data");
    let o = skelgest(&["synth", "--out", p(&out), "--patients", patients, "--seed", "42"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn checkpoints(dir: &Path) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "ckpt"))
        .count()
}

const TINY: &[&str] = &["--hidden", "4", "--epochs", "1", "--batch-size", "64", "--seed", "3"];

#[test]
fn synth_is_deterministic_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let o = skelgest(&["synth", "--out", p(d), "--patients", "6", "--seed", "42"]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(tree(&a), tree(&b));
    let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count() - 1, 174);
    assert!(a.join("resolved_config.toml").exists());
}

#[test]
fn synth_without_seed_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = skelgest(&["synth", "--out", p(&tmp.path().join("x")), "--patients", "6"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn method_out_of_range_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = skelgest(&["train", "--data", "x", "--out", p(tmp.path()), "--method", "6", "--seed", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "seed = 1\n[model]\nlayers = 2\n").unwrap();
    let o = skelgest(&["--config", p(&cfg), "synth", "--out", p(&tmp.path().join("x"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_supplies_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    fs::write(&cfg, "seed = 42\n[synth]\npatients = 2\n").unwrap();
    let out = tmp.path().join("x");
    let o = Command::new(env!("CARGO_BIN_EXE_skelgest"))
        .args(["synth", "--out", p(&out)])
        .env("SKELGEST_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("manifest.csv")).unwrap().lines().count() - 1, 58);
}

#[test]
fn gradcheck_exit_codes() {
    let o = skelgest(&["gradcheck"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("passed"));
    assert_eq!(code(&skelgest(&["gradcheck", "--tolerance", "0"])), 1);
}

#[test]
fn ingest_prints_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "3");
    let o = skelgest(&["ingest", "--data", p(&data), "--folds", "1,2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["n_sequences"], 87);
    assert_eq!(v["n_static"], 45);
    assert_eq!(v["sequences_per_fold"]["3"], 29);
}

#[test]
fn ingest_of_missing_dataset_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = skelgest(&["ingest", "--data", p(&tmp.path().join("nothing"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn train_writes_one_checkpoint_per_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "2");

    let multi = tmp.path().join("multi");
    let mut args = vec!["train", "--data", p(&data), "--out", p(&multi)];
    args.extend(["--protocol", "multiclass", "--method", "5", "--frames", "128,256", "--net", "lstm"]);
    args.extend(TINY);
    let o = skelgest(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(checkpoints(&multi), 4);
    assert!(multi.join("run_manifest.json").exists());
    assert!(multi.join("resolved_config.toml").exists());

    let binary = tmp.path().join("binary");
    let mut args = vec!["train", "--data", p(&data), "--out", p(&binary)];
    args.extend(["--protocol", "binary", "--method", "3", "--frames", "256"]);
    args.extend(TINY);
    let o = skelgest(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(checkpoints(&binary), 29);
}

#[test]
fn evaluate_rerun_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "6");
    let first = tmp.path().join("eval1");
    let mut args = vec!["evaluate", "--data", p(&data), "--out", p(&first)];
    args.extend(["--method", "3", "--frames", "32", "--folds", "2,4"]);
    args.extend(TINY);
    let o = skelgest(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "summary.csv", "confusion_static.csv", "confusion_dynamic.csv", "resolved_config.toml"] {
        assert!(first.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&fs::read(first.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 3);
    let s = &report["summary"];
    let (st, dy, avg) = (
        s["static_accuracy"].as_f64().unwrap(),
        s["dynamic_accuracy"].as_f64().unwrap(),
        s["average_accuracy"].as_f64().unwrap(),
    );
    assert!((avg - (st + dy) / 2.0).abs() < 1e-12);
    assert_eq!(fs::read_to_string(first.join("confusion_static.csv")).unwrap().lines().count(), 16);

    let second = tmp.path().join("eval2");
    let manifest = first.join("run_manifest.json");
    let o = skelgest(&["evaluate", "--data", p(&data), "--out", p(&second), "--run-manifest", p(&manifest)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(first.join("report.json")).unwrap(), fs::read(second.join("report.json")).unwrap());
    assert_eq!(
        fs::read(first.join("resolved_config.toml")).unwrap(),
        fs::read(second.join("resolved_config.toml")).unwrap()
    );

    let o = skelgest(&["report", "--input", p(&first.join("report.json")), "--format", "csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(o.stdout, fs::read(first.join("summary.csv")).unwrap());
    let o = skelgest(&["report", "--input", p(&first.join("report.json")), "--format", "json"]);
    assert_eq!(o.stdout, fs::read(first.join("report.json")).unwrap());
}

#[test]
fn rerun_against_different_data_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "3");
    let other = tmp.path().join("other");
    let o = skelgest(&["synth", "--out", p(&other), "--patients", "3", "--seed", "43"]);
    assert_eq!(code(&o), 0);
    let train = tmp.path().join("t");
    let mut args = vec!["train", "--data", p(&data), "--out", p(&train), "--frames", "32"];
    args.extend(TINY);
    assert_eq!(code(&skelgest(&args)), 0);
    let o = skelgest(&[
        "evaluate",
        "--data",
        p(&other),
        "--out",
        p(&tmp.path().join("e")),
        "--run-manifest",
        p(&train.join("run_manifest.json")),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn evaluate_saved_checkpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let data = synth(tmp.path(), "2");
    let train = tmp.path().join("t");
    let mut args = vec!["train", "--data", p(&data), "--out", p(&train), "--frames", "32"];
    args.extend(TINY);
    assert_eq!(code(&skelgest(&args)), 0);

    let eval = tmp.path().join("e");
    let mut args = vec!["evaluate", "--data", p(&data), "--out", p(&eval), "--checkpoints", p(&train), "--frames", "32"];
    args.extend(TINY);
    let o = skelgest(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(eval.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["folds"].as_array().unwrap().len(), 0);

    let mut args = vec!["evaluate", "--data", p(&data), "--out", p(&eval), "--checkpoints", p(&train), "--frames", "64"];
    args.extend(TINY);
    assert_eq!(code(&skelgest(&args)), 3);
}
