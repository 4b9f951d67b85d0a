use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::corpus::LabeledFeatureSet;
use crate::head::{softmax, ClassifierHead};
use crate::rng;

/// Joint softmax training of every column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchTrainConfig {
    pub init_sigma: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub minibatch: usize,
    /// Stop once the mean epoch loss improves by less than this.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for BatchTrainConfig {
    fn default() -> Self {
        Self {
            init_sigma: 0.01,
            learning_rate: 0.01,
            max_epochs: 30,
            minibatch: 32,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

/// Trains a full softmax head on `all_train` by minibatch SGD on the mean
/// cross-entropy. Classes are registered in class-table order, all as base
/// classes. Classes without examples are rejected.
pub fn batch_retrain_oracle(all_train: &LabeledFeatureSet, cfg: &BatchTrainConfig) -> Result<ClassifierHead> {
    if !(cfg.learning_rate > 0.0 && cfg.init_sigma > 0.0 && cfg.minibatch > 0) {
        return Err(EvalError::InvalidConfig("learning_rate, init_sigma and minibatch must be positive"));
    }
    let mut table = all_train.classes().to_vec();
    table.sort_by_key(|c| c.id);
    if table.len() < 2 {
        return Err(EvalError::Degenerate("need at least two classes"));
    }
    let counts = all_train.class_counts();
    if counts.values().any(|&c| c == 0) {
        return Err(EvalError::Degenerate("every class needs at least one example"));
    }

    let dim = all_train.dim();
    let n = table.len();
    let targets: Vec<usize> = all_train
        .examples()
        .iter()
        .map(|e| table.iter().position(|c| c.id == e.label).expect("label in table"))
        .collect();

    let mut rng = rng::rng(cfg.seed);
    let normal = Normal::new(0.0, cfg.init_sigma).map_err(|_| EvalError::InvalidConfig("init_sigma"))?;
    let mut weights: Vec<f64> = (0..dim * n).map(|_| normal.sample(&mut rng)).collect();
    let mut biases = vec![0.0; n];

    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut prev = f64::INFINITY;
    let mut gw = vec![0.0; dim * n];
    let mut gb = vec![0.0; n];
    let mut logits = vec![0.0; n];
    for _ in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.minibatch) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let x = &all_train.examples()[i].features;
                for (k, l) in logits.iter_mut().enumerate() {
                    let col = &weights[k * dim..(k + 1) * dim];
                    *l = col.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + biases[k];
                }
                let p = softmax(&logits);
                epoch_loss -= p[targets[i]].max(f64::MIN_POSITIVE).ln();
                for k in 0..n {
                    let r = p[k] - if k == targets[i] { 1.0 } else { 0.0 };
                    gb[k] += r;
                    for (g, v) in gw[k * dim..(k + 1) * dim].iter_mut().zip(x) {
                        *g += r * v;
                    }
                }
            }
            let step = cfg.learning_rate / batch.len() as f64;
            for (w, g) in weights.iter_mut().zip(&gw) {
                *w -= step * g;
            }
            for (b, g) in biases.iter_mut().zip(&gb) {
                *b -= step * g;
            }
        }
        epoch_loss /= targets.len() as f64;
        if (prev - epoch_loss).abs() < cfg.tolerance {
            break;
        }
        prev = epoch_loss;
    }

    let names: Vec<String> = table.into_iter().map(|c| c.name).collect();
    Ok(ClassifierHead::from_parts(dim, weights, biases, &names, all_train.source().copied())?)
}
