//! Fixtures shared by the benchmarks.

use std::collections::BTreeMap;

use openset_core::detmath::{BoundingBox, Detection, DetectionBatch, GroundTruth, Proposal};
use openset_core::eval::batch_retrain_oracle;
use openset_core::head::pools_by_class;
use openset_core::{ClassifierHead, ExperimentConfig, LabeledFeatureSet};

/// Base head on the default synthetic corpus, its negative pools and the
/// first class left out of it.
pub struct HeadFixture {
    pub head: ClassifierHead,
    pub pools: BTreeMap<u16, LabeledFeatureSet>,
    pub new_name: String,
    pub new_train: LabeledFeatureSet,
}

pub fn head_fixture() -> HeadFixture {
    let cfg = ExperimentConfig::default().resolved();
    let (base_train, _, new_classes) = cfg.corpora().expect("default corpus");
    let head = batch_retrain_oracle(&base_train, &cfg.oracle).expect("base head");
    let pools = pools_by_class(&head, &base_train).expect("pools");
    let first = new_classes.into_iter().next().expect("at least one new class");
    HeadFixture { head, pools, new_name: first.name, new_train: first.train }
}

/// Cheap deterministic stream in `[0, 1)`.
fn unit_stream(mut state: u64) -> impl FnMut() -> f64 {
    move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn detection_batch(proposals: usize, classes: usize) -> DetectionBatch {
    let mut u = unit_stream(0x9e37_79b9_7f4a_7c15);
    let mut bbox = || BoundingBox { x: 200.0 * u(), y: 200.0 * u(), w: 10.0 + 90.0 * u(), h: 10.0 + 90.0 * u() };
    let proposals = (0..proposals)
        .map(|i| {
            let pred_box1 = bbox();
            let pred_box2 = bbox();
            let gt_box = bbox();
            let mut gt_class = vec![0.0; classes];
            gt_class[i % classes] = 1.0;
            Proposal {
                pred_box1,
                pred_box2,
                pred_obj1: 0.3,
                pred_obj2: 0.6,
                pred_class: vec![1.0 / classes as f64; classes],
                gt_box,
                gt_obj: i % 2 == 0,
                gt_class,
            }
        })
        .collect();
    DetectionBatch { proposals }
}

pub fn detections(count: usize, gts: usize) -> (Vec<Detection>, Vec<GroundTruth>) {
    let mut u = unit_stream(0x2545_f491_4f6c_dd1d);
    let bbox = |u: &mut dyn FnMut() -> f64| BoundingBox { x: 100.0 * u(), y: 100.0 * u(), w: 10.0 + 30.0 * u(), h: 10.0 + 30.0 * u() };
    let dets = (0..count)
        .map(|i| Detection { bbox: bbox(&mut u), score: u(), label: (i % 5) as u16 })
        .collect();
    let truths = (0..gts).map(|i| GroundTruth { bbox: bbox(&mut u), label: (i % 5) as u16 }).collect();
    (dets, truths)
}
