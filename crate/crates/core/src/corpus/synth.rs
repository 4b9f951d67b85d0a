use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ClassLabel, CorpusError, LabeledFeatureSet, Result};
use crate::rng;

/// Isotropic Gaussian clusters whose centers lie on a sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub dim: usize,
    pub class_count: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub mean_radius: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            class_count: 8,
            train_per_class: 200,
            test_per_class: 100,
            mean_radius: 5.0,
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(CorpusError::InvalidSpec("dim must be positive"));
        }
        if self.class_count == 0 || self.class_count > usize::from(u16::MAX) {
            return Err(CorpusError::InvalidSpec("class_count out of range"));
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return Err(CorpusError::InvalidSpec("per-class counts must be positive"));
        }
        if !(self.mean_radius > 0.0 && self.mean_radius.is_finite()) {
            return Err(CorpusError::InvalidSpec("mean_radius must be positive"));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return Err(CorpusError::InvalidSpec("noise_sigma must be positive"));
        }
        Ok(())
    }

    pub fn class_name(index: usize) -> String {
        format!("class{index:02}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: LabeledFeatureSet,
    pub test: LabeledFeatureSet,
    /// Class centers in class-id order, before any quantization.
    pub means: Vec<Vec<f64>>,
}

/// Draws a corpus from `spec`. Features are rounded to `f32` so that the
/// result round-trips through the feature file unchanged.
pub fn synth_gaussian_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut rng = rng::rng(spec.seed);
    let means: Vec<Vec<f64>> = (0..spec.class_count)
        .map(|_| loop {
            let v: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.into_iter().map(|x| x * spec.mean_radius / norm).collect();
            }
        })
        .collect();

    let table: Vec<ClassLabel> = (0..spec.class_count)
        .map(|c| ClassLabel {
            id: c as u16,
            name: SynthSpec::class_name(c),
        })
        .collect();
    let mut train = LabeledFeatureSet::new(spec.dim, table.clone())?;
    let mut test = LabeledFeatureSet::new(spec.dim, table)?;
    for (c, mean) in means.iter().enumerate() {
        for (set, count) in [
            (&mut train, spec.train_per_class),
            (&mut test, spec.test_per_class),
        ] {
            for _ in 0..count {
                let x = mean
                    .iter()
                    .map(|m| {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        f64::from((m + spec.noise_sigma * n) as f32)
                    })
                    .collect();
                set.push(c as u16, x)?;
            }
        }
    }
    Ok(SynthCorpus { train, test, means })
}
