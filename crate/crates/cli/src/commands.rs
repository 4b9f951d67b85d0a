use std::fs;
use std::net::SocketAddr;
use std::path::Path;

use openset_core::corpus::{load_feature_file, synth_gaussian_corpus, write_feature_file, LabeledFeatureSet};
use openset_core::detmath::{average_precision, combined_precision, top1_accuracy, Detection, GroundTruth};
use openset_core::eval::{batch_retrain_oracle, ratio_sweep, run_synthetic_experiment, write_report, write_sweep, ExperimentConfig};
use openset_core::head::{load_checkpoint, pools_by_class, predict_set, save_checkpoint, ClassifierHead, TrainConfig};
use openset_core::rng;
use openset_service::EngineConfig;
use serde::Deserialize;

use crate::failure::Failure;
use crate::{Common, RatioFlags};

type Output = Result<Vec<String>, Failure>;

fn require_file(path: &Path) -> Result<&Path, Failure> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Failure::usage("missing_file", format!("{}: no such file", path.display())))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(require_file(path)?)?;
    serde_json::from_str(&text).map_err(|e| Failure::new("config", format!("{}: {e}", path.display())))
}

pub fn load_experiment_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg: ExperimentConfig = match &common.config {
        Some(path) => read_json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn apply_ratios(cfg: &mut ExperimentConfig, ratios: &RatioFlags) {
    let sweep = &mut cfg.sweep;
    sweep.ratio_start = ratios.ratio_start.unwrap_or(sweep.ratio_start);
    sweep.ratio_end = ratios.ratio_end.unwrap_or(sweep.ratio_end);
    sweep.ratio_step = ratios.ratio_step.unwrap_or(sweep.ratio_step);
}

fn load_set(path: &Path) -> Result<LabeledFeatureSet, Failure> {
    Ok(load_feature_file(require_file(path)?)?)
}

fn load_head(path: &Path) -> Result<ClassifierHead, Failure> {
    Ok(load_checkpoint(require_file(path)?)?)
}

/// Top-1 accuracy of `head` on `set`, matching labels by class name. Examples
/// of classes the head does not know count as errors.
fn accuracy(head: &ClassifierHead, set: &LabeledFeatureSet) -> Result<f64, Failure> {
    let predictions: Vec<Option<u16>> = predict_set(head, set)?.into_iter().map(Some).collect();
    let truth: Vec<Option<u16>> = (0..set.len()).map(|i| head.class_index(set.label_name(i))).collect();
    Ok(top1_accuracy(&predictions, &truth)?)
}

pub fn synth(cfg: &ExperimentConfig, out: &Path) -> Output {
    let spec = cfg.resolved().synth;
    let corpus = synth_gaussian_corpus(&spec)?;
    fs::create_dir_all(out)?;
    let train = out.join("train.fvec");
    let test = out.join("test.fvec");
    write_feature_file(&corpus.train, &train)?;
    write_feature_file(&corpus.test, &test)?;
    Ok(vec![
        format!("train={}", train.display()),
        format!("test={}", test.display()),
        format!("classes={}", spec.class_count),
        format!("dim={}", spec.dim),
    ])
}

pub fn train_base(cfg: &ExperimentConfig, train: &Path, out: &Path) -> Output {
    let set = load_set(train)?;
    let head = batch_retrain_oracle(&set, &cfg.resolved().oracle)?;
    save_checkpoint(&head, out)?;
    Ok(vec![
        format!("checkpoint={}", out.display()),
        format!("classes={}", head.num_classes()),
        format!("train_top1={}", accuracy(&head, &set)?),
    ])
}

pub fn add_class(cfg: &ExperimentConfig, head: &Path, positives: &Path, name: &str, pools: &Path, out: &Path) -> Output {
    let head = load_head(head)?;
    let file = load_set(positives)?;
    let positives = match file.class_id(name) {
        Some(id) => file.filter_class(id),
        None => file,
    }
    .relabeled(name);
    let pools = pools_by_class(&head, &load_set(pools)?)?;
    let train = cfg.resolved().train;
    let train = TrainConfig { seed: rng::derive(train.seed, head.version()), ..train };
    let next = head.add_class(name, &positives, &pools, &train)?;
    save_checkpoint(&next, out)?;
    Ok(vec![
        format!("checkpoint={}", out.display()),
        format!("classes={}", next.num_classes()),
        format!("version={}", next.version()),
        format!("positives={}", positives.len()),
    ])
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    prediction: String,
    label: String,
}

pub fn eval_predictions(path: &Path) -> Output {
    let mut reader = csv::Reader::from_path(require_file(path)?)?;
    let rows = reader.deserialize().collect::<Result<Vec<PredictionRow>, _>>()?;
    let predictions: Vec<&str> = rows.iter().map(|r| r.prediction.as_str()).collect();
    let labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
    Ok(vec![format!("top1={}", top1_accuracy(&predictions, &labels)?), format!("examples={}", rows.len())])
}

#[derive(Debug, Deserialize)]
struct DetectionFile {
    detections: Vec<Detection>,
    ground_truths: Vec<GroundTruth>,
}

pub fn eval_detections(path: &Path, iou: f64) -> Output {
    let file: DetectionFile = read_json(path)?;
    for b in file.detections.iter().map(|d| d.bbox).chain(file.ground_truths.iter().map(|g| g.bbox)) {
        b.validate()?;
    }
    Ok(vec![
        format!("ap={}", average_precision(&file.detections, &file.ground_truths, iou)),
        format!("combined={}", combined_precision(&file.detections, &file.ground_truths)),
    ])
}

pub fn eval_head(head: &Path, test: &Path) -> Output {
    let head = load_head(head)?;
    let set = load_set(test)?;
    Ok(vec![format!("top1={}", accuracy(&head, &set)?), format!("examples={}", set.len())])
}

pub fn sweep(cfg: &ExperimentConfig, head: &Path, test: &Path, name: &str, out: &Path) -> Output {
    let head = load_head(head)?;
    let set = load_set(test)?;
    let id = set
        .class_id(name)
        .ok_or_else(|| Failure::new("eval", format!("class {name:?} not in {}", test.display())))?;
    let old = set.filter(|e| e.label != id);
    let new = set.filter_class(id);
    let resolved = cfg.resolved();
    let report = ratio_sweep(&head, &old, &[new], &resolved.sweep)?;
    let (csv_path, json_path) = write_sweep(&report, cfg.seed, out)?;
    Ok(vec![
        format!("csv={}", csv_path.display()),
        format!("json={}", json_path.display()),
        format!("median={}", report.summary.median),
        format!("anchor_top1={}", report.anchor_accuracy),
    ])
}

pub fn experiment(cfg: &ExperimentConfig, out: &Path) -> Output {
    let report = run_synthetic_experiment(cfg)?;
    let (csv_path, json_path) = write_report(&report, out)?;
    let mut lines = vec![
        format!("csv={}", csv_path.display()),
        format!("json={}", json_path.display()),
        format!("baseline={}", report.baseline_accuracy),
    ];
    if let Some(last) = report.steps.last() {
        lines.push(format!("final_median={}", last.incremental.summary.median));
        lines.push(format!("final_oracle_median={}", last.oracle.summary.median));
    }
    Ok(lines)
}

pub fn serve(config: &Path, bind: SocketAddr) -> Output {
    let cfg: EngineConfig = read_json(config)?;
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(openset_service::serve(cfg, bind)).map_err(|e| Failure::new("serve", e))?;
    Ok(Vec::new())
}
