use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use openset_core::corpus::{load_feature_file, write_feature_file, LabeledFeatureSet};
use openset_core::head::{load_checkpoint, Origin};
use serde_json::{json, Value};

fn openset(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_openset")).current_dir(dir).args(args).output().unwrap()
}

/// Runs and expects success; returns the `key=value` lines.
fn ok(dir: &Path, args: &[&str]) -> BTreeMap<String, String> {
    let out = openset(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn error_line(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let last = stderr.lines().last().expect("an error line");
    serde_json::from_str(last).expect("machine-readable error")
}

/// Small experiment manifest so tests stay quick.
fn small_config(dir: &Path) -> String {
    let cfg = json!({
        "seed": 3,
        "synth": { "dim": 16, "class_count": 6, "train_per_class": 40, "test_per_class": 20 },
        "base_classes": 4,
        "sweep": { "old_sample_count": 100 }
    });
    let path = dir.join("small.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

/// Corpus files with 9 classes; the base files hold the first 8.
fn corpus(dir: &Path) {
    ok(dir, &["synth", "--out", "data", "--dim", "16", "--classes", "9", "--train-per-class", "40", "--test-per-class", "20", "--seed", "2"]);
    let train = load_feature_file(dir.join("data/train.fvec")).unwrap();
    let keep = |set: &LabeledFeatureSet, base: bool| {
        let filtered = set.filter(|e| (e.label < 8) == base);
        let table = filtered.classes().iter().filter(|c| (c.id < 8) == base).cloned().collect();
        let mut out = LabeledFeatureSet::new(set.dim(), table).unwrap();
        for e in filtered.examples() {
            out.push(e.label, e.features.clone()).unwrap();
        }
        out
    };
    write_feature_file(&keep(&train, true), dir.join("data/base.fvec")).unwrap();
    write_feature_file(&keep(&train, false).relabeled("multimeter"), dir.join("data/m.fvec")).unwrap();
}

#[test]
fn synth_writes_both_splits() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["synth", "--out", "d", "--dim", "8", "--classes", "3", "--train-per-class", "5", "--test-per-class", "2"]);
    assert_eq!(out["classes"], "3");
    let train = load_feature_file(dir.path().join("d/train.fvec")).unwrap();
    let test = load_feature_file(dir.path().join("d/test.fvec")).unwrap();
    assert_eq!((train.dim(), train.len(), test.len()), (8, 15, 6));
}

#[test]
fn train_then_add_class_grows_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    let base = ok(d, &["train-base", "--train", "data/base.fvec", "--out", "base.ck"]);
    assert_eq!(base["classes"], "8");
    assert!(base["train_top1"].parse::<f64>().unwrap() > 0.95);

    let before = load_checkpoint(d.join("base.ck")).unwrap();
    let added = ok(d, &["add-class", "--name", "multimeter", "--positives", "data/m.fvec", "--head", "base.ck", "--pools", "data/base.fvec"]);
    assert_eq!(added["classes"], "9");
    assert_eq!(added["positives"], "40");
    let after = load_checkpoint(d.join("base.ck")).unwrap();
    assert_eq!(after.num_classes(), before.num_classes() + 1);
    assert_eq!(after.version(), before.version() + 1);
    assert_eq!(after.registry()[8].name, "multimeter");
    assert_eq!(after.registry()[8].origin, Origin::Added);
    assert_eq!(&after.weights()[..before.weights().len()], before.weights());

    let dup = openset(d, &["add-class", "--name", "multimeter", "--positives", "data/m.fvec", "--head", "base.ck", "--pools", "data/base.fvec"]);
    assert_eq!(dup.status.code(), Some(1));
    assert_eq!(error_line(&dup)["error"], "head");

    let eval = ok(d, &["eval", "--head", "base.ck", "--test", "data/test.fvec"]);
    assert!(eval["top1"].parse::<f64>().unwrap() > 0.8);
    assert_eq!(eval["examples"], "180");
}

#[test]
fn eval_counts_matching_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("prediction,label\n");
    for i in 0..100 {
        csv += if i < 45 { "mug,mug\n" } else { "mug,multimeter\n" };
    }
    fs::write(dir.path().join("p.csv"), csv).unwrap();
    let out = ok(dir.path(), &["eval", "--predictions", "p.csv"]);
    assert_eq!(out["top1"], "0.45");
    assert_eq!(out["examples"], "100");
}

#[test]
fn eval_scores_detections() {
    let dir = tempfile::tempdir().unwrap();
    let bbox = |x: f64| json!({ "x": x, "y": 0.0, "w": 10.0, "h": 10.0 });
    let file = json!({
        "detections": [
            { "bbox": bbox(0.0), "score": 0.4, "label": 1 },
            { "bbox": bbox(50.0), "score": 0.9, "label": 1 }
        ],
        "ground_truths": [{ "bbox": bbox(0.0), "label": 1 }]
    });
    fs::write(dir.path().join("d.json"), file.to_string()).unwrap();
    let out = ok(dir.path(), &["eval", "--detections", "d.json"]);
    assert_eq!(out["ap"], "0.5");
    assert_eq!(out["combined"], "0.5");
}

#[test]
fn sweep_writes_the_ratio_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    corpus(d);
    ok(d, &["train-base", "--train", "data/base.fvec", "--out", "base.ck"]);
    ok(d, &["add-class", "--name", "class08", "--positives", "data/train.fvec", "--head", "base.ck", "--pools", "data/base.fvec"]);
    let out = ok(d, &["sweep", "--head", "base.ck", "--test", "data/test.fvec", "--name", "class08", "--out", "sw", "--seed", "4"]);
    assert!(out["csv"].ends_with("sweep-seed4.csv"));
    let csv = fs::read_to_string(d.join(&out["csv"])).unwrap();
    assert_eq!(csv.lines().count(), 24);
    assert!(csv.starts_with("class_name,ratio,top1\nclass08,0.05,"));

    let narrow = ok(d, &["sweep", "--head", "base.ck", "--test", "data/test.fvec", "--name", "class08", "--out", "sw2", "--ratio-start", "0.1", "--ratio-end", "0.2", "--ratio-step", "0.05"]);
    let csv = fs::read_to_string(d.join(&narrow["csv"])).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
}

#[test]
fn experiment_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let a = ok(d, &["experiment", "--config", &cfg, "--seed", "7", "--out", "a"]);
    let b = ok(d, &["experiment", "--config", &cfg, "--seed", "7", "--out", "b"]);
    assert!(a["json"].ends_with("experiment-seed7.json"), "flag seed wins over the file");
    for name in ["experiment-seed7.csv", "experiment-seed7.json"] {
        let x = fs::read(d.join("a").join(name)).unwrap();
        let y = fs::read(d.join("b").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    assert_eq!(a, b.into_iter().map(|(k, v)| (k, v.replace("b/", "a/"))).collect());

    let c = ok(d, &["experiment", "--config", &cfg, "--out", "c"]);
    assert!(c["json"].ends_with("experiment-seed3.json"));
    let report: Value = serde_json::from_slice(&fs::read(d.join(&c["json"])).unwrap()).unwrap();
    assert_eq!(report["steps"].as_array().unwrap().len(), 2);
    assert_eq!(report["metadata"]["seed"], 3);
}

#[test]
fn default_config_matches_the_engine_defaults() {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")).unwrap();
    let cfg: openset_core::ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg, openset_core::ExperimentConfig::default());
}

#[test]
fn usage_errors_exit_2_with_a_json_line() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["bogus"][..], &["experiment", "--out", "x", "--frobnicate"], &["add-class", "--name", "x"], &[]] {
        let out = openset(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_eq!(error_line(&out)["error"], "usage");
    }
    let out = openset(dir.path(), &["eval", "--predictions", "missing.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_line(&out);
    assert_eq!(err["error"], "missing_file");
    assert!(err["message"].as_str().unwrap().contains("missing.csv"));

    let out = openset(dir.path(), &["eval"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "argument_conflict");

    let help = openset(dir.path(), &["--help"]);
    assert!(help.status.success());
    assert!(String::from_utf8_lossy(&help.stdout).contains("experiment"));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    let out = openset(dir.path(), &["experiment", "--config", "bad.json", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");

    fs::write(dir.path().join("junk.fvec"), b"nope").unwrap();
    let out = openset(dir.path(), &["train-base", "--train", "junk.fvec", "--out", "x.ck"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "corpus");
}

#[test]
fn serve_reports_a_bad_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.ck"), b"garbage").unwrap();
    fs::write(dir.path().join("pools.fvec"), b"garbage").unwrap();
    let cfg = json!({ "head": "bad.ck", "pools": "pools.fvec" });
    fs::write(dir.path().join("engine.json"), cfg.to_string()).unwrap();
    let out = openset(dir.path(), &["serve", "--config", "engine.json", "--bind", "127.0.0.1:0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_line(&out);
    assert_eq!(err["error"], "serve");
    assert!(err["message"].as_str().unwrap().contains("checkpoint"));
}
