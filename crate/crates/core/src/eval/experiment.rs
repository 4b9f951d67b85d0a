use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    batch_retrain_oracle, ratio_sweep, BatchTrainConfig, EvalError, Result, SweepConfig, SweepReport,
};
use crate::corpus::{synth_gaussian_corpus, LabeledFeatureSet, SynthSpec};
use crate::detmath::top1_accuracy;
use crate::embed::Digest;
use crate::head::{add_class_end_to_end, pools_by_class, predict_set, ClassifierHead, TrainConfig};
use crate::rng;

/// A class introduced during the experiment, with its own train/test split.
#[derive(Debug, Clone)]
pub struct NewClass {
    pub name: String,
    pub train: LabeledFeatureSet,
    pub test: LabeledFeatureSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub class_name: String,
    pub head_version: u64,
    /// Draw probabilities of the confusion-weighted negative sampler, by class name.
    pub draw_distribution: BTreeMap<String, f64>,
    pub incremental: SweepReport,
    /// Same sweep on a head retrained jointly on every class seen so far.
    pub oracle: SweepReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetadata {
    pub seed: u64,
    pub train: TrainConfig,
    pub oracle: BatchTrainConfig,
    pub sweep: SweepConfig,
    pub synth: Option<SynthSpec>,
    pub extractor_digest: Option<Digest>,
    pub base_classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Top-1 accuracy of the base head on the full base test set.
    pub baseline_accuracy: f64,
    pub steps: Vec<StepReport>,
    pub metadata: ExperimentMetadata,
}

impl ExperimentReport {
    pub fn seed(&self) -> u64 {
        self.metadata.seed
    }
}

/// Synthetic experiment description. The master `seed` determines every
/// stage seed; seeds inside the nested configs are overwritten.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub synth: SynthSpec,
    pub base_classes: usize,
    pub train: TrainConfig,
    pub oracle: BatchTrainConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synth: SynthSpec { class_count: 14, ..SynthSpec::default() },
            base_classes: 8,
            train: TrainConfig::default(),
            oracle: BatchTrainConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

const STREAM_SYNTH: u64 = 11;
const STREAM_TRAIN: u64 = 12;
const STREAM_ORACLE: u64 = 13;
const STREAM_SWEEP: u64 = 14;

impl ExperimentConfig {
    /// Copy with stage seeds derived from the master seed.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.synth.seed = rng::derive(self.seed, STREAM_SYNTH);
        c.train.seed = rng::derive(self.seed, STREAM_TRAIN);
        c.oracle.seed = rng::derive(self.seed, STREAM_ORACLE);
        c.sweep.seed = rng::derive(self.seed, STREAM_SWEEP);
        c
    }

    /// Base and new-class corpora: the first `base_classes` synthetic classes
    /// form the base, every further class is added in id order.
    pub fn corpora(&self) -> Result<(LabeledFeatureSet, LabeledFeatureSet, Vec<NewClass>)> {
        let cfg = self.resolved();
        if cfg.base_classes < 2 || cfg.base_classes > cfg.synth.class_count {
            return Err(EvalError::InvalidConfig("base_classes must be in 2..=class_count"));
        }
        let corpus = synth_gaussian_corpus(&cfg.synth)?;
        let base = cfg.base_classes as u16;
        let base_train = corpus.train.filter(|e| e.label < base);
        let base_test = corpus.test.filter(|e| e.label < base);
        let new_classes = (base..cfg.synth.class_count as u16)
            .map(|id| {
                let name = SynthSpec::class_name(usize::from(id));
                NewClass {
                    train: corpus.train.filter_class(id).relabeled(&name),
                    test: corpus.test.filter_class(id).relabeled(&name),
                    name,
                }
            })
            .collect();
        Ok((restrict_table(&base_train), restrict_table(&base_test), new_classes))
    }
}

/// Drops class-table entries that have no examples.
fn restrict_table(set: &LabeledFeatureSet) -> LabeledFeatureSet {
    let counts = set.class_counts();
    let table = set.classes().iter().filter(|c| counts[&c.id] > 0).cloned().collect();
    let mut out = LabeledFeatureSet::new(set.dim(), table).expect("subset of a valid table");
    for e in set.examples() {
        out.push(e.label, e.features.clone()).expect("validated example");
    }
    out.with_source(set.source().copied())
}

pub fn run_synthetic_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let resolved = cfg.resolved();
    let (base_train, base_test, new_classes) = cfg.corpora()?;
    let mut report = run_incremental_experiment(
        &base_train,
        &base_test,
        &new_classes,
        &resolved.train,
        &resolved.oracle,
        &resolved.sweep,
    )?;
    report.metadata.seed = cfg.seed;
    report.metadata.synth = Some(resolved.synth);
    Ok(report)
}

/// Trains the base head jointly, then adds each new class incrementally.
/// After every addition the incremental head and a jointly retrained oracle
/// are swept over the dynamic test set; the class's test portion then joins
/// the old pool.
pub fn run_incremental_experiment(
    base_train: &LabeledFeatureSet,
    base_test: &LabeledFeatureSet,
    new_classes: &[NewClass],
    head_cfg: &TrainConfig,
    oracle_cfg: &BatchTrainConfig,
    sweep_cfg: &SweepConfig,
) -> Result<ExperimentReport> {
    if base_train.is_empty() || base_test.is_empty() {
        return Err(EvalError::Empty);
    }
    head_cfg.validate()?;
    sweep_cfg.validate()?;
    let mut seen: HashSet<&str> = base_train.classes().iter().map(|c| c.name.as_str()).collect();
    for c in new_classes {
        if !seen.insert(&c.name) {
            return Err(EvalError::DuplicateClass(c.name.clone()));
        }
    }

    let mut head = batch_retrain_oracle(base_train, oracle_cfg)?;
    let base_classes: Vec<String> = head.registry().iter().map(|c| c.name.clone()).collect();
    let baseline_accuracy = accuracy(&head, base_test)?;
    let mut pools = pools_by_class(&head, base_train)?;

    let mut added_tests = Vec::with_capacity(new_classes.len());
    let mut all_train = vec![base_train.clone()];
    let mut steps = Vec::with_capacity(new_classes.len());
    for (step, class) in new_classes.iter().enumerate() {
        let positives = class.train.relabeled(&class.name);
        let step_cfg = TrainConfig { seed: rng::derive(head_cfg.seed, step as u64), ..head_cfg.clone() };

        let appended = head.append_class(&class.name, &step_cfg)?;
        let dist = appended.confusion_distribution(&positives, step_cfg.smoothing)?;
        let draw_distribution = dist
            .probs
            .iter()
            .map(|(id, p)| (head.class_name(*id).unwrap_or_default().to_string(), *p))
            .collect();

        head = add_class_end_to_end(&head, &class.name, &positives, &pools, &step_cfg)?;
        let new_id = head.class_index(&class.name).expect("just added");
        pools.insert(new_id, positives.clone());
        added_tests.push(class.test.relabeled(&class.name));
        all_train.push(positives);

        let step_sweep = SweepConfig { seed: rng::derive(sweep_cfg.seed, step as u64), ..sweep_cfg.clone() };
        let incremental = ratio_sweep(&head, base_test, &added_tests, &step_sweep)?;
        let merged = LabeledFeatureSet::merge(&all_train)?;
        let oracle_head = batch_retrain_oracle(&merged, oracle_cfg)?;
        let oracle = ratio_sweep(&oracle_head, base_test, &added_tests, &step_sweep)?;

        steps.push(StepReport {
            step: step + 1,
            class_name: class.name.clone(),
            head_version: head.version(),
            draw_distribution,
            incremental,
            oracle,
        });
    }

    Ok(ExperimentReport {
        baseline_accuracy,
        steps,
        metadata: ExperimentMetadata {
            seed: head_cfg.seed,
            train: head_cfg.clone(),
            oracle: oracle_cfg.clone(),
            sweep: sweep_cfg.clone(),
            synth: None,
            extractor_digest: head.extractor_digest().copied(),
            base_classes,
        },
    })
}

fn accuracy(head: &ClassifierHead, set: &LabeledFeatureSet) -> Result<f64> {
    let predictions = predict_set(head, set)?;
    let truth = (0..set.len())
        .map(|i| {
            let name = set.label_name(i);
            head.class_index(name).ok_or_else(|| EvalError::UnknownClass(name.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    top1_accuracy(&predictions, &truth).map_err(|_| EvalError::Empty)
}
