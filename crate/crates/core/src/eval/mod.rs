//! Evaluation protocol for incremental class addition: the dynamic test set,
//! the new-to-old ratio sweep with boxplot statistics, the batch-retrain
//! oracle and the end-to-end incremental experiment.

mod dynamic;
mod experiment;
mod oracle;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::head::HeadError;

pub use dynamic::{dynamic_eval, old_pool, quantiles, ratio_grid, ratio_sweep, FiveNumberSummary, RatioPoint};
pub use experiment::{
    run_incremental_experiment, run_synthetic_experiment, ExperimentConfig, ExperimentReport, NewClass,
    StepReport,
};
pub use oracle::{batch_retrain_oracle, BatchTrainConfig};
pub use report::{csv_bytes, report_paths, sweep_csv_bytes, write_report, write_sweep, CsvRow, SweepCsvRow};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Head(#[from] HeadError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("the newest class has no test examples")]
    EmptyNewestPool,
    #[error("no old test examples to draw from")]
    EmptyOldPool,
    #[error("class {0:?} is not known to the head")]
    UnknownClass(String),
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    #[error("empty input")]
    Empty,
    #[error("degenerate training data: {0}")]
    Degenerate(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = EvalError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub ratio_start: f64,
    pub ratio_end: f64,
    pub ratio_step: f64,
    /// Ratio reported on its own, outside the grid.
    pub anchor_ratio: f64,
    /// Number of old-class samples per evaluation.
    pub old_sample_count: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ratio_start: 0.05,
            ratio_end: 0.5,
            ratio_step: 0.02,
            anchor_ratio: 0.1,
            old_sample_count: 1000,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.ratio_start, self.ratio_end, self.ratio_step, self.anchor_ratio]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.ratio_start > 0.0 && self.ratio_start <= self.ratio_end) {
            return Err(EvalError::InvalidConfig("need 0 < ratio_start <= ratio_end"));
        }
        if self.ratio_step <= 0.0 {
            return Err(EvalError::InvalidConfig("ratio_step must be positive"));
        }
        if self.anchor_ratio <= 0.0 {
            return Err(EvalError::InvalidConfig("anchor_ratio must be positive"));
        }
        if self.old_sample_count == 0 {
            return Err(EvalError::InvalidConfig("old_sample_count must be positive"));
        }
        Ok(())
    }
}

/// Accuracy over the ratio grid for one added class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub class_name: String,
    pub points: Vec<RatioPoint>,
    pub summary: FiveNumberSummary,
    pub anchor_ratio: f64,
    pub anchor_accuracy: f64,
}
