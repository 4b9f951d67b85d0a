use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{dot, sample_negatives, ClassifierHead, HeadError, Result, TrainConfig};
use crate::corpus::LabeledFeatureSet;
use crate::rng;

const STREAM_APPEND: u64 = 1;
const STREAM_SAMPLE: u64 = 2;
const STREAM_TRAIN: u64 = 3;

/// Mean binary cross-entropy of the score `θᵀx + b` against 0/1 targets.
///
/// Parameters are packed as `[θ₁ … θ_d, b]`.
pub struct OneVsAllObjective<'a> {
    samples: Vec<(&'a [f64], f64)>,
}

impl<'a> OneVsAllObjective<'a> {
    pub fn new(positives: &'a LabeledFeatureSet, negatives: &'a LabeledFeatureSet) -> Self {
        let samples = positives
            .examples()
            .iter()
            .map(|e| (e.features.as_slice(), 1.0))
            .chain(negatives.examples().iter().map(|e| (e.features.as_slice(), 0.0)))
            .collect();
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn loss_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let idx: Vec<usize> = (0..self.samples.len()).collect();
        self.batch_loss_and_grad(params, &idx)
    }

    fn batch_loss_and_grad(&self, params: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let (theta, bias) = params.split_at(params.len() - 1);
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for &i in batch {
            let (x, y) = self.samples[i];
            let s = dot(theta, x) + bias[0];
            // softplus(s) - y·s, stable for large |s|
            loss += s.max(0.0) + (-s.abs()).exp().ln_1p() - y * s;
            let r = sigmoid(s) - y;
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += r * xi;
            }
            *grad.last_mut().unwrap() += r;
        }
        let scale = 1.0 / batch.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Trains only the freshly appended column (and its bias) one-vs-all by
/// minibatch SGD: positives have target 1, negatives target 0.
pub fn train_new_column(
    head: &ClassifierHead,
    positives: &LabeledFeatureSet,
    negatives: &LabeledFeatureSet,
    cfg: &TrainConfig,
) -> Result<ClassifierHead> {
    cfg.validate()?;
    if !head.has_pending_column() {
        return Err(HeadError::NoPendingColumn);
    }
    if positives.is_empty() {
        return Err(HeadError::EmptyPositives);
    }
    if negatives.is_empty() {
        return Err(HeadError::EmptyNegatives);
    }
    head.check_set(positives)?;
    head.check_set(negatives)?;

    let objective = OneVsAllObjective::new(positives, negatives);
    let mut next = head.clone();
    let (theta, bias) = next.new_column_mut();
    let mut params: Vec<f64> = theta.iter().copied().chain([*bias]).collect();

    let mut order: Vec<usize> = (0..objective.len()).collect();
    let mut rng = rng::rng(cfg.seed);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.minibatch) {
            let (_, grad) = objective.batch_loss_and_grad(&params, batch);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
    }

    theta.copy_from_slice(&params[..params.len() - 1]);
    *bias = params[params.len() - 1];
    next.pending = false;
    next.version = head.version + 1;
    Ok(next)
}

/// Append, measure confusion, draw `ρ·|positives|` negatives and train the
/// new column, each stage seeded from a stream derived from `cfg.seed`.
/// The result is one published mutation: its version is `head.version + 1`.
pub fn add_class_end_to_end(
    head: &ClassifierHead,
    name: &str,
    positives: &LabeledFeatureSet,
    pools: &BTreeMap<u16, LabeledFeatureSet>,
    cfg: &TrainConfig,
) -> Result<ClassifierHead> {
    cfg.validate()?;
    if positives.is_empty() {
        return Err(HeadError::EmptyPositives);
    }
    head.check_set(positives)?;
    let append_cfg = TrainConfig { seed: rng::derive(cfg.seed, STREAM_APPEND), ..cfg.clone() };
    let appended = head.append_class(name, &append_cfg)?;
    let dist = appended.confusion_distribution(positives, cfg.smoothing)?;
    let count = ((cfg.negatives_per_positive * positives.len() as f64).round() as usize).max(1);
    let negatives = sample_negatives(pools, &dist, count, rng::derive(cfg.seed, STREAM_SAMPLE))?;
    let train_cfg = TrainConfig { seed: rng::derive(cfg.seed, STREAM_TRAIN), ..cfg.clone() };
    let mut trained = train_new_column(&appended, positives, &negatives, &train_cfg)?;
    trained.bump_version(head.version + 1);
    Ok(trained)
}

impl ClassifierHead {
    pub fn train_new_column(
        &self,
        positives: &LabeledFeatureSet,
        negatives: &LabeledFeatureSet,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        train_new_column(self, positives, negatives, cfg)
    }

    pub fn add_class(
        &self,
        name: &str,
        positives: &LabeledFeatureSet,
        pools: &BTreeMap<u16, LabeledFeatureSet>,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        add_class_end_to_end(self, name, positives, pools, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ClassLabel;
    use rand::Rng;

    fn set(rows: impl IntoIterator<Item = Vec<f64>>) -> LabeledFeatureSet {
        let rows: Vec<_> = rows.into_iter().collect();
        let mut s = LabeledFeatureSet::new(rows[0].len(), vec![ClassLabel { id: 0, name: "x".into() }]).unwrap();
        for r in rows {
            s.push(0, r).unwrap();
        }
        s
    }

    fn base_head() -> ClassifierHead {
        let names = vec!["a".to_string(), "b".to_string()];
        ClassifierHead::from_parts(2, vec![1.0, 0.0, 0.0, 1.0], vec![0.1, -0.2], &names, None).unwrap()
    }

    /// Separable toy problem: positives near (2, 2), negatives near (-2, -2) ± jitter.
    fn separable(seed: u64) -> (LabeledFeatureSet, LabeledFeatureSet) {
        let mut r = rng::rng(seed);
        let mut jitter = || r.random_range(-0.5..0.5);
        let pos: Vec<Vec<f64>> = (0..50).map(|_| vec![2.0 + jitter(), 2.0 + jitter()]).collect();
        let neg: Vec<Vec<f64>> = (0..150).map(|_| vec![-2.0 + jitter(), -2.0 + jitter()]).collect();
        (set(pos), set(neg))
    }

    #[test]
    fn zero_epochs_is_identity_on_parameters() {
        let head = base_head().append_class("n", &TrainConfig::default()).unwrap();
        let (p, n) = separable(1);
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let out = train_new_column(&head, &p, &n, &cfg).unwrap();
        assert_eq!(out.weights(), head.weights());
        assert_eq!(out.biases(), head.biases());
        assert_eq!(out.registry(), head.registry());
    }

    #[test]
    fn only_new_column_changes() {
        let head = base_head().append_class("n", &TrainConfig::default()).unwrap();
        let (p, n) = separable(2);
        let out = train_new_column(&head, &p, &n, &TrainConfig::default()).unwrap();
        assert_eq!(&out.weights()[..4], &head.weights()[..4]);
        assert_eq!(&out.biases()[..2], &head.biases()[..2]);
        assert_ne!(out.column(2), head.column(2));
        assert_eq!(out.version(), head.version() + 1);
        assert!(!out.has_pending_column());
    }

    #[test]
    fn separable_data_is_learned() {
        let head = base_head().append_class("n", &TrainConfig::default()).unwrap();
        let (p, n) = separable(3);
        let out = train_new_column(&head, &p, &n, &TrainConfig::default()).unwrap();
        let score = |x: &[f64]| dot(out.column(2), x) + out.bias(2);
        let correct = p.examples().iter().filter(|e| score(&e.features) > 0.0).count()
            + n.examples().iter().filter(|e| score(&e.features) <= 0.0).count();
        assert!(correct as f64 / 200.0 >= 0.99);
    }

    #[test]
    fn errors() {
        let (p, n) = separable(4);
        let empty = LabeledFeatureSet::new(2, vec![]).unwrap();
        assert!(matches!(
            train_new_column(&base_head(), &p, &n, &TrainConfig::default()),
            Err(HeadError::NoPendingColumn)
        ));
        let head = base_head().append_class("n", &TrainConfig::default()).unwrap();
        assert!(matches!(
            train_new_column(&head, &empty, &n, &TrainConfig::default()),
            Err(HeadError::EmptyPositives)
        ));
        assert!(matches!(
            train_new_column(&head, &p, &empty, &TrainConfig::default()),
            Err(HeadError::EmptyNegatives)
        ));
    }

    #[test]
    fn end_to_end_is_deterministic() {
        let (p, n) = separable(5);
        let pools = BTreeMap::from([(0, n.clone()), (1, n)]);
        let cfg = TrainConfig { seed: 17, ..Default::default() };
        let a = add_class_end_to_end(&base_head(), "n", &p, &pools, &cfg).unwrap();
        let b = add_class_end_to_end(&base_head(), "n", &p, &pools, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_classes(), 3);
        assert_eq!(a.version(), 1);
    }
}
