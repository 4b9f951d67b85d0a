//! Labeled feature sets: in-memory representation, stratified splitting,
//! the `IOSR1` binary container and a seeded Gaussian-cluster generator.

mod file;
mod synth;

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::Digest;
use crate::rng;

pub use file::{decode_feature_file, encode_feature_file, load_feature_file, write_feature_file};
pub use synth::{synth_gaussian_corpus, SynthCorpus, SynthSpec};

/// Dense activation vector produced by a feature extractor.
pub type FeatureVector = Vec<f64>;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("bad magic bytes, not a feature file")]
    BadMagic,
    #[error("unsupported feature file version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated feature file while reading {0}")]
    Truncated(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown label id {0}")]
    UnknownLabel(u16),
    #[error("duplicate class {0:?} in class table")]
    DuplicateClass(String),
    #[error("class name is not valid UTF-8")]
    InvalidName,
    #[error("feature value {0} is not finite")]
    NonFinite(f64),
    #[error("feature value {0} cannot be stored as f32 without loss")]
    PrecisionLoss(f64),
    #[error("feature set is empty")]
    Empty,
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(&'static str),
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    FractionOutOfRange(f64),
    #[error("class {0:?} has fewer than 2 examples, cannot stratify")]
    ClassTooSmall(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Entry of a feature set's class table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassLabel {
    pub id: u16,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub label: u16,
    pub features: FeatureVector,
}

/// Feature vectors of a fixed dimension, each tagged with a class-table id.
///
/// `source` records the digest of the extractor that produced the features,
/// when known. It is an in-memory tag only; the file format does not carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFeatureSet {
    dim: usize,
    classes: Vec<ClassLabel>,
    examples: Vec<Example>,
    #[serde(default)]
    source: Option<Digest>,
}

impl LabeledFeatureSet {
    /// Creates an empty set with the given class table.
    pub fn new(dim: usize, classes: Vec<ClassLabel>) -> Result<Self> {
        if dim == 0 {
            return Err(CorpusError::DimensionMismatch { expected: 1, found: 0 });
        }
        let mut ids = HashSet::new();
        let mut names = HashSet::new();
        for c in &classes {
            if !ids.insert(c.id) || !names.insert(c.name.as_str()) {
                return Err(CorpusError::DuplicateClass(c.name.clone()));
            }
        }
        Ok(Self {
            dim,
            classes,
            examples: Vec::new(),
            source: None,
        })
    }

    pub fn with_source(mut self, source: Option<Digest>) -> Self {
        self.source = source;
        self
    }

    pub fn push(&mut self, label: u16, features: FeatureVector) -> Result<()> {
        if features.len() != self.dim {
            return Err(CorpusError::DimensionMismatch {
                expected: self.dim,
                found: features.len(),
            });
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(CorpusError::NonFinite(*v));
        }
        if self.class_name(label).is_none() {
            return Err(CorpusError::UnknownLabel(label));
        }
        self.examples.push(Example { label, features });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn source(&self) -> Option<&Digest> {
        self.source.as_ref()
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn class_name(&self, id: u16) -> Option<&str> {
        self.classes
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.name.as_str())
    }

    pub fn class_id(&self, name: &str) -> Option<u16> {
        self.classes.iter().find(|c| c.name == name).map(|c| c.id)
    }

    /// Name of the class of example `index`.
    pub fn label_name(&self, index: usize) -> &str {
        self.class_name(self.examples[index].label)
            .expect("labels are validated on insertion")
    }

    /// Copy with only the examples of class `id`.
    pub fn filter_class(&self, id: u16) -> Self {
        self.filter(|e| e.label == id)
    }

    pub fn filter(&self, mut keep: impl FnMut(&Example) -> bool) -> Self {
        Self {
            dim: self.dim,
            classes: self.classes.clone(),
            examples: self.examples.iter().filter(|e| keep(e)).cloned().collect(),
            source: self.source,
        }
    }

    /// Number of examples per class id, in id order.
    pub fn class_counts(&self) -> BTreeMap<u16, usize> {
        let mut counts: BTreeMap<u16, usize> = self.classes.iter().map(|c| (c.id, 0)).collect();
        for e in &self.examples {
            *counts.entry(e.label).or_default() += 1;
        }
        counts
    }

    /// Concatenates sets of equal dimension, merging class tables by name.
    /// Labels of later sets are remapped onto fresh ids when their names are new.
    pub fn merge<'a>(sets: impl IntoIterator<Item = &'a LabeledFeatureSet>) -> Result<Self> {
        let mut out: Option<LabeledFeatureSet> = None;
        for set in sets {
            let acc = match out.as_mut() {
                None => {
                    out = Some(set.clone());
                    continue;
                }
                Some(acc) => acc,
            };
            if set.dim != acc.dim {
                return Err(CorpusError::DimensionMismatch {
                    expected: acc.dim,
                    found: set.dim,
                });
            }
            if acc.source != set.source {
                acc.source = None;
            }
            let mut remap = BTreeMap::new();
            for c in &set.classes {
                let id = match acc.class_id(&c.name) {
                    Some(id) => id,
                    None => {
                        let id = acc.classes.iter().map(|c| c.id + 1).max().unwrap_or(0);
                        acc.classes.push(ClassLabel {
                            id,
                            name: c.name.clone(),
                        });
                        id
                    }
                };
                remap.insert(c.id, id);
            }
            acc.examples.extend(set.examples.iter().map(|e| Example {
                label: remap[&e.label],
                features: e.features.clone(),
            }));
        }
        out.ok_or(CorpusError::Empty)
    }

    /// Copy where every example belongs to a single class called `name`.
    pub fn relabeled(&self, name: &str) -> Self {
        Self {
            dim: self.dim,
            classes: vec![ClassLabel { id: 0, name: name.to_string() }],
            examples: self
                .examples
                .iter()
                .map(|e| Example { label: 0, features: e.features.clone() })
                .collect(),
            source: self.source,
        }
    }

    /// Rounds every feature through `f32`, the on-disk precision.
    pub fn quantized(mut self) -> Self {
        for e in &mut self.examples {
            for v in &mut e.features {
                *v = f64::from(*v as f32);
            }
        }
        self
    }

    /// Stratified split. Each class contributes `round(n · test_fraction)`
    /// examples to the test side, clamped so both sides keep at least one.
    /// Relative order of examples is preserved on both sides.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Self, Self)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(CorpusError::FractionOutOfRange(test_fraction));
        }
        let mut by_class: BTreeMap<u16, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.examples.iter().enumerate() {
            by_class.entry(e.label).or_default().push(i);
        }
        let mut rng = rng::rng(seed);
        let mut is_test = vec![false; self.examples.len()];
        for (label, mut idx) in by_class {
            if idx.len() < 2 {
                let name = self.class_name(label).unwrap_or_default().to_string();
                return Err(CorpusError::ClassTooSmall(name));
            }
            let n = idx.len();
            let take = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
            idx.shuffle(&mut rng);
            for &i in &idx[..take] {
                is_test[i] = true;
            }
        }
        let mut k = 0;
        let test = self.filter(|_| {
            k += 1;
            is_test[k - 1]
        });
        let mut k = 0;
        let train = self.filter(|_| {
            k += 1;
            !is_test[k - 1]
        });
        Ok((train, test))
    }
}
