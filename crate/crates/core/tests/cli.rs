use std::path::Path;
use std::process::Command;

use serde_json::json;
use ximp::harness::{synthetic_records, write_csv, GridSpec, TrainConfig};
use ximp::model::ModelConfig;

fn ximp(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_ximp")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "ximp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_model() -> ModelConfig {
    ModelConfig {
        n_layers: 1,
        hidden: 16,
        reduced_dim: 16,
        out_dim: 16,
        ..ModelConfig::default()
    }
}

#[test]
fn prep_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    write_csv(&data, &synthetic_records(30, 1)).unwrap();
    std::fs::write(
        dir.path().join("raw.csv"),
        "smiles,target\nCCO,1\nC[C@H](N)O,2\nc1ccccc1,3\n",
    )
    .unwrap();

    let out = ximp(&["prep", "--input", p(&dir.path().join("raw.csv")), "--cache", p(&dir.path().join("cache"))]);
    assert!(out.contains("2 records cached, 1 rejected"), "{out}");
    let rejected = std::fs::read_to_string(dir.path().join("cache/rejected.csv")).unwrap();
    assert_eq!(rejected.lines().count(), 2);

    let run = json!({
        "data": "train.csv",
        "model": small_model(),
        "train": TrainConfig { epochs: 3, batch_size: 8, ..TrainConfig::default() },
    });
    let config = dir.path().join("run.json");
    std::fs::write(&config, run.to_string()).unwrap();
    let ck = dir.path().join("model.json");
    ximp(&["train", "--config", p(&config), "--seed", "4", "--out", p(&ck)]);
    let curve = std::fs::read_to_string(dir.path().join("model.curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);

    let out = ximp(&["eval", "--checkpoint", p(&ck), "--input", p(&data)]);
    let mae: f64 = out.trim().strip_prefix("MAE ").unwrap().parse().unwrap();
    assert!(mae.is_finite() && mae >= 0.0);
}

#[test]
fn wl_check_views() {
    let out = ximp(&["wl-check", "--smiles-a", "Oc1cnccc1", "--smiles-b", "Oc1ccncc1"]);
    let verdicts: Vec<&str> = out.lines().skip(1).map(|l| l.split_whitespace().last().unwrap()).collect();
    assert_eq!(verdicts, ["false", "false", "false", "true"]);
    let bad = Command::new(env!("CARGO_BIN_EXE_ximp"))
        .args(["wl-check", "--smiles-a", "C", "--smiles-b", "C", "--views", "xyz"])
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn profile_from_long_table() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("maes.csv");
    std::fs::write(&table, "model,task,mae\na,t1,1.0\nb,t1,2.0\na,t2,3.0\nb,t2,3.1\n").unwrap();
    let out_path = dir.path().join("profile.csv");
    let out = ximp(&["profile", "--results", p(&table), "--out", p(&out_path)]);
    assert!(out.contains("a            wins 1.000  within tau 1.000"), "{out}");
    assert!(out.contains("b            wins 0.000  within tau 0.500"), "{out}");
    assert!(out_path.exists());
}

#[test]
fn gridsearch_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    write_csv(&data, &synthetic_records(40, 2)).unwrap();
    let spec = GridSpec {
        base: ModelConfig { dropout: 0.0, ..small_model() },
        n_layers: vec![1],
        hidden: vec![16],
        out_dim: vec![16],
        batch_size: vec![64],
        head_hidden: vec![16],
        epochs: vec![50],
        master_seed: 3,
        folds: 1,
        test_seeds: 1,
    };
    let grid = dir.path().join("grid.json");
    std::fs::write(&grid, serde_json::to_string(&spec).unwrap()).unwrap();
    let out_dir = dir.path().join("out");
    let out = ximp(&["gridsearch", "--grid", p(&grid), "--data", p(&data), "--out", p(&out_dir)]);
    assert!(out.contains("selected by validation"), "{out}");
    for f in ["results.csv", "folds.csv", "timing.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}
