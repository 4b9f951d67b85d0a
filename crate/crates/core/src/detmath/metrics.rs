use serde::{Deserialize, Serialize};

use super::{iou, BoundingBox, DetError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
    pub label: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub bbox: BoundingBox,
    pub label: u16,
}

/// Detection indices by descending score; ties keep input order.
fn rank(detections: &[Detection]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..detections.len()).collect();
    idx.sort_by(|&a, &b| detections[b].score.total_cmp(&detections[a].score));
    idx
}

/// Greedy matching in score order. Each detection takes the unmatched ground
/// truth of its label with the highest IoU; it is a true positive when that
/// IoU exceeds `threshold`. Returns one flag per ranked detection.
fn match_ranked(detections: &[Detection], order: &[usize], gts: &[GroundTruth], threshold: f64) -> Vec<bool> {
    let mut taken = vec![false; gts.len()];
    order
        .iter()
        .map(|&d| {
            let det = &detections[d];
            let best = gts
                .iter()
                .enumerate()
                .filter(|(g, gt)| !taken[*g] && gt.label == det.label)
                .map(|(g, gt)| (g, iou(&det.bbox, &gt.bbox)))
                .fold(None, |acc: Option<(usize, f64)>, (g, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((g, v)),
                });
            match best {
                Some((g, v)) if v > threshold => {
                    taken[g] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

/// All-points interpolated average precision over ranked detections.
///
/// Each true positive adds `1/G` recall at the interpolated precision
/// `max_{r' ≥ r} P(r')`, `G` being the number of ground truths. Returns 0
/// when there are no ground truths.
pub fn average_precision(detections: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let order = rank(detections);
    let tp = match_ranked(detections, &order, gts, iou_threshold);
    let mut hits = 0usize;
    let precision: Vec<f64> = tp
        .iter()
        .enumerate()
        .map(|(r, &t)| {
            hits += usize::from(t);
            hits as f64 / (r + 1) as f64
        })
        .collect();
    let mut envelope = precision;
    for r in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[r] = envelope[r].max(envelope[r + 1]);
    }
    let sum: f64 = tp.iter().zip(&envelope).filter(|(t, _)| **t).map(|(_, p)| *p).sum();
    sum / gts.len() as f64
}

/// Fraction of detections that localize a ground truth (IoU > 0.5) and carry
/// its label, each ground truth consumed at most once in score order.
pub fn combined_precision(detections: &[Detection], gts: &[GroundTruth]) -> f64 {
    if detections.is_empty() {
        return 0.0;
    }
    let order = rank(detections);
    let tp = match_ranked(detections, &order, gts, 0.5);
    tp.iter().filter(|t| **t).count() as f64 / detections.len() as f64
}

pub fn top1_accuracy<T: PartialEq>(predictions: &[T], labels: &[T]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(DetError::LengthMismatch(predictions.len(), labels.len()));
    }
    if predictions.is_empty() {
        return Err(DetError::Empty);
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}
