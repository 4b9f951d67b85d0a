//! Incremental open-set recognition engine.
//!
//! A trained linear classification head is extended at runtime with new
//! classes: a fresh weight column is appended, negatives are drawn from the
//! known classes in proportion to how often the new positives are mistaken
//! for them, and only the new column is trained one-vs-all. The crate also
//! carries the detection math (anchors, box transforms, region resampling,
//! the multi-task detection loss, AP) and the ratio-sweep evaluation
//! protocol used to track recognition quality as classes are added.

pub mod corpus;
pub mod detmath;
pub mod embed;
pub mod eval;
pub mod head;
pub mod rng;
pub mod session;

pub use corpus::{ClassLabel, Example, FeatureVector, LabeledFeatureSet, SynthSpec};
pub use embed::{Digest, Extractor, ExtractorConfig, ImageTensor};
pub use eval::{ExperimentConfig, ExperimentReport, SweepConfig, SweepReport};
pub use head::{ClassId, ClassifierHead, ConfusionDistribution, Origin, TrainConfig};
pub use session::{Phase, SessionEvent, SessionState};
