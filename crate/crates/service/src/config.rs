use std::path::PathBuf;

use openset_core::corpus::CorpusError;
use openset_core::embed::{EmbedError, ExtractorConfig};
use openset_core::eval::EvalError;
use openset_core::head::{HeadError, TrainConfig};
use serde::{Deserialize, Serialize};

/// Service configuration, usually read from a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Head checkpoint to serve.
    pub head: PathBuf,
    /// Feature file of labeled examples of the known classes; negatives are
    /// drawn from it when a class is added.
    pub pools: PathBuf,
    /// Optional feature file shown by `GET /world`.
    #[serde(default)]
    pub world: Option<PathBuf>,
    /// Enables image payloads.
    #[serde(default)]
    pub extractor: Option<ExtractorConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Experiment report JSON served at `GET /metrics/experiment`.
    #[serde(default)]
    pub experiment_report: Option<PathBuf>,
    /// Where to write the head after each published retrain.
    #[serde(default)]
    pub checkpoint_out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("checkpoint: {0}")]
    Head(#[from] HeadError),
    #[error("feature file: {0}")]
    Corpus(#[from] CorpusError),
    #[error("extractor: {0}")]
    Embed(#[from] EmbedError),
    #[error("experiment report: {0}")]
    Report(String),
    #[error("pools: {0}")]
    Eval(#[from] EvalError),
}
