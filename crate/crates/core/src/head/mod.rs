//! Incremental linear classification head.
//!
//! The head is an immutable snapshot: every mutating operation returns a new
//! head with a bumped `version`. New classes are added by appending a single
//! randomly initialized column and training only that column one-vs-all
//! against negatives drawn in proportion to the confusion of the new
//! positives with each known class.

mod checkpoint;
mod sampling;
mod train;

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::LabeledFeatureSet;
use crate::embed::Digest;
use crate::rng;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use sampling::{pools_by_class, sample_negatives};
pub use train::{add_class_end_to_end, train_new_column, OneVsAllObjective};

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("dimension mismatch: head expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("extractor mismatch: head bound to {head}, features from {features}")]
    ExtractorMismatch { head: Digest, features: Digest },
    #[error("class {0:?} already exists")]
    DuplicateClass(String),
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("class name must not be empty")]
    EmptyName,
    #[error("positive set is empty")]
    EmptyPositives,
    #[error("negative set is empty")]
    EmptyNegatives,
    #[error("class {0} has positive draw probability but an empty pool")]
    EmptyPool(u16),
    #[error("no known classes to measure confusion against")]
    NoKnownClasses,
    #[error("head has no freshly appended column to train")]
    NoPendingColumn,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("checkpoint: bad magic bytes")]
    BadMagic,
    #[error("checkpoint: unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("checkpoint: truncated while reading {0}")]
    Truncated(&'static str),
    #[error("checkpoint: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = HeadError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Base,
    Added,
}

/// Registry entry. Ids are dense `0..n` and equal the column index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassId {
    pub id: u16,
    pub name: String,
    pub origin: Origin,
}

/// Hyperparameters of incremental class addition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Standard deviation of the new column's initial weights.
    pub init_sigma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    /// Negatives drawn per positive.
    pub negatives_per_positive: f64,
    /// Additive smoothing of the confusion counts.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            init_sigma: 0.01,
            learning_rate: 0.3,
            epochs: 100,
            minibatch: 32,
            negatives_per_positive: 2.0,
            smoothing: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.init_sigma) {
            return Err(HeadError::InvalidConfig("init_sigma must be positive"));
        }
        if !pos(self.learning_rate) {
            return Err(HeadError::InvalidConfig("learning_rate must be positive"));
        }
        if self.minibatch == 0 {
            return Err(HeadError::InvalidConfig("minibatch must be positive"));
        }
        if !pos(self.negatives_per_positive) {
            return Err(HeadError::InvalidConfig("negatives_per_positive must be positive"));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(HeadError::InvalidConfig("smoothing must be non-negative"));
        }
        Ok(())
    }
}

/// Draw probabilities over known classes, keyed by class id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionDistribution {
    pub probs: BTreeMap<u16, f64>,
}

impl ConfusionDistribution {
    /// Normalizes non-negative weights.
    pub fn from_weights(weights: BTreeMap<u16, f64>) -> Result<Self> {
        let total: f64 = weights.values().sum();
        if weights.values().any(|w| !(*w >= 0.0 && w.is_finite())) || total <= 0.0 {
            return Err(HeadError::InvalidConfig("draw weights must be non-negative with positive sum"));
        }
        Ok(Self {
            probs: weights.into_iter().map(|(k, w)| (k, w / total)).collect(),
        })
    }

    pub fn get(&self, id: u16) -> f64 {
        self.probs.get(&id).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    dim: usize,
    /// Column-major `dim × n`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    registry: Vec<ClassId>,
    extractor_digest: Option<Digest>,
    version: u64,
    /// The last column was appended and has not been trained yet.
    pending: bool,
}

impl ClassifierHead {
    /// Head with zero weights over the given base classes.
    pub fn zeros(dim: usize, names: &[String], extractor_digest: Option<Digest>) -> Result<Self> {
        let n = names.len();
        Self::from_parts(dim, vec![0.0; dim * n], vec![0.0; n], names, extractor_digest)
    }

    /// Assembles a base head from column-major weights and biases.
    pub fn from_parts(
        dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        names: &[String],
        extractor_digest: Option<Digest>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(HeadError::DimensionMismatch { expected: 1, found: 0 });
        }
        if names.len() > usize::from(u16::MAX) {
            return Err(HeadError::InvalidConfig("too many classes"));
        }
        if weights.len() != dim * names.len() || biases.len() != names.len() {
            return Err(HeadError::InvalidConfig("weight shape does not match class count"));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(HeadError::InvalidConfig("non-finite parameter"));
        }
        let mut registry = Vec::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(HeadError::EmptyName);
            }
            if registry.iter().any(|c: &ClassId| &c.name == name) {
                return Err(HeadError::DuplicateClass(name.clone()));
            }
            registry.push(ClassId { id: i as u16, name: name.clone(), origin: Origin::Base });
        }
        Ok(Self {
            dim,
            weights,
            biases,
            registry,
            extractor_digest,
            version: 0,
            pending: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.registry.len()
    }

    pub fn registry(&self) -> &[ClassId] {
        &self.registry
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn extractor_digest(&self) -> Option<&Digest> {
        self.extractor_digest.as_ref()
    }

    /// True while the newest column is appended but untrained.
    pub fn has_pending_column(&self) -> bool {
        self.pending
    }

    /// Classes that take part in confusion measurement (all but a pending column).
    pub fn known_classes(&self) -> usize {
        self.registry.len() - usize::from(self.pending)
    }

    pub fn column(&self, id: usize) -> &[f64] {
        &self.weights[id * self.dim..(id + 1) * self.dim]
    }

    pub fn bias(&self, id: usize) -> f64 {
        self.biases[id]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn class_index(&self, name: &str) -> Option<u16> {
        self.registry.iter().find(|c| c.name == name).map(|c| c.id)
    }

    pub fn class_name(&self, id: u16) -> Option<&str> {
        self.registry.get(usize::from(id)).map(|c| c.name.as_str())
    }

    /// Rejects features produced by a different extractor. Untagged heads or
    /// untagged features are accepted.
    pub fn check_source(&self, source: Option<&Digest>) -> Result<()> {
        match (self.extractor_digest, source) {
            (Some(head), Some(&features)) if head != features => {
                Err(HeadError::ExtractorMismatch { head, features })
            }
            _ => Ok(()),
        }
    }

    pub fn check_set(&self, set: &LabeledFeatureSet) -> Result<()> {
        if set.dim() != self.dim {
            return Err(HeadError::DimensionMismatch { expected: self.dim, found: set.dim() });
        }
        self.check_source(set.source())
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(HeadError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(())
    }

    /// `θᵢᵀx + bᵢ` for every class.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.logits_unchecked(x, self.num_classes()))
    }

    /// Logits of the first `n` classes; `x` must already have the right length.
    pub(crate) fn logits_unchecked(&self, x: &[f64], n: usize) -> Vec<f64> {
        self.weights
            .chunks_exact(self.dim)
            .zip(&self.biases)
            .take(n)
            .map(|(col, b)| dot(col, x) + b)
            .collect()
    }

    /// Argmax class and softmax probabilities. Ties go to the lowest id.
    pub fn predict(&self, x: &[f64]) -> Result<(u16, Vec<f64>)> {
        let logits = self.logits(x)?;
        if logits.is_empty() {
            return Err(HeadError::NoKnownClasses);
        }
        Ok((argmax(&logits) as u16, softmax(&logits)))
    }

    /// Argmax over all classes.
    pub fn classify(&self, x: &[f64]) -> Result<u16> {
        self.check_dim(x)?;
        let logits = self.logits_unchecked(x, self.num_classes());
        if logits.is_empty() {
            return Err(HeadError::NoKnownClasses);
        }
        Ok(argmax(&logits) as u16)
    }

    /// Appends a class whose column and bias are drawn i.i.d. from
    /// `Normal(0, init_sigma²)` under `cfg.seed`. Existing columns are untouched.
    pub fn append_class(&self, name: &str, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if name.is_empty() {
            return Err(HeadError::EmptyName);
        }
        if self.class_index(name).is_some() {
            return Err(HeadError::DuplicateClass(name.to_string()));
        }
        if self.registry.len() >= usize::from(u16::MAX) {
            return Err(HeadError::InvalidConfig("too many classes"));
        }
        let normal = Normal::new(0.0, cfg.init_sigma)
            .map_err(|_| HeadError::InvalidConfig("init_sigma must be positive"))?;
        let mut rng = rng::rng(cfg.seed);
        let mut next = self.clone();
        next.weights.extend((0..self.dim).map(|_| normal.sample(&mut rng)));
        next.biases.push(normal.sample(&mut rng));
        next.registry.push(ClassId {
            id: self.registry.len() as u16,
            name: name.to_string(),
            origin: Origin::Added,
        });
        next.pending = true;
        next.version += 1;
        Ok(next)
    }

    /// Draw distribution from how the positives are classified among the
    /// known classes: `P(Cᵢ) = (cᵢ + ε) / (Σc + n·ε)`.
    pub fn confusion_distribution(
        &self,
        positives: &LabeledFeatureSet,
        smoothing: f64,
    ) -> Result<ConfusionDistribution> {
        if positives.is_empty() {
            return Err(HeadError::EmptyPositives);
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(HeadError::InvalidConfig("smoothing must be non-negative"));
        }
        self.check_set(positives)?;
        let known = self.known_classes();
        if known == 0 {
            return Err(HeadError::NoKnownClasses);
        }
        let mut counts = vec![0usize; known];
        for e in positives.examples() {
            counts[argmax(&self.logits_unchecked(&e.features, known))] += 1;
        }
        let total = positives.len() as f64 + known as f64 * smoothing;
        let probs = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u16, (c as f64 + smoothing) / total))
            .collect();
        Ok(ConfusionDistribution { probs })
    }

    pub(crate) fn bump_version(&mut self, to: u64) {
        self.version = to;
    }

    pub(crate) fn new_column_mut(&mut self) -> (&mut [f64], &mut f64) {
        let n = self.registry.len();
        let start = (n - 1) * self.dim;
        (&mut self.weights[start..], &mut self.biases[n - 1])
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the maximum; the first one wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Convenience: predictions for a whole set, as class ids of `head`.
pub fn predict_set(head: &ClassifierHead, set: &LabeledFeatureSet) -> Result<Vec<u16>> {
    head.check_set(set)?;
    set.examples().iter().map(|e| head.classify(&e.features)).collect()
}
