//! Detection geometry, the two-stage multi-task detection loss and the
//! detection/recognition metrics.

mod anchors;
mod boxes;
mod loss;
mod metrics;
mod resample;

use thiserror::Error;

pub use anchors::{anchor_grid, top_proposals, AnchorConfig};
pub use boxes::{apply_box_transform, encode_box_transform, iou, BoundingBox, BoxTransform};
pub use loss::{
    detection_loss, DetectionBatch, LossGradients, LossWeights, Proposal, ProposalGradient, PROB_CLAMP,
};
pub use metrics::{average_precision, combined_precision, top1_accuracy, Detection, GroundTruth};
pub use resample::{bilinear_resample, FeatureMap};

#[derive(Debug, Error, PartialEq)]
pub enum DetError {
    #[error("invalid box: {0}")]
    InvalidBox(&'static str),
    #[error("degenerate anchor grid: {0}")]
    DegenerateGrid(&'static str),
    #[error("box does not overlap the feature map")]
    NoOverlap,
    #[error("invalid feature map: {0}")]
    InvalidMap(&'static str),
    #[error("invalid detection batch: {0}")]
    InvalidBatch(String),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
}

pub type Result<T, E = DetError> = std::result::Result<T, E>;
