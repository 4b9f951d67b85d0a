use serde::{Deserialize, Serialize};

use super::{BoundingBox, DetError, Result};

/// Log arguments are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-7;

/// One proposed region: predictions of both regression stages and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub pred_box1: BoundingBox,
    pub pred_box2: BoundingBox,
    pub pred_obj1: f64,
    pub pred_obj2: f64,
    /// Class probability vector.
    pub pred_class: Vec<f64>,
    pub gt_box: BoundingBox,
    pub gt_obj: bool,
    /// One-hot target.
    pub gt_class: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionBatch {
    pub proposals: Vec<Proposal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub class: f64,
    pub bbox: f64,
    pub objectness: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { class: 1.0, bbox: 1.0, objectness: 1.0 }
    }
}

/// Partial derivatives of the loss with respect to one proposal's predictions.
/// Box gradients are ordered `(x, y, w, h)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProposalGradient {
    pub box1: [f64; 4],
    pub box2: [f64; 4],
    pub obj1: f64,
    pub obj2: f64,
    pub class: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    pub proposals: Vec<ProposalGradient>,
}

const SUM_TOLERANCE: f64 = 1e-3;

impl DetectionBatch {
    pub fn validate(&self) -> Result<()> {
        if self.proposals.is_empty() {
            return Err(DetError::InvalidBatch("batch has no proposals".into()));
        }
        for (i, p) in self.proposals.iter().enumerate() {
            let bad = |msg: &str| Err(DetError::InvalidBatch(format!("proposal {i}: {msg}")));
            let boxes = [p.pred_box1, p.pred_box2, p.gt_box];
            if boxes.iter().flat_map(|b| b.as_array()).any(|v| !v.is_finite()) {
                return bad("non-finite box coordinate");
            }
            for o in [p.pred_obj1, p.pred_obj2] {
                if !(0.0..=1.0).contains(&o) {
                    return bad("objectness outside [0, 1]");
                }
            }
            if p.pred_class.is_empty() || p.pred_class.len() != p.gt_class.len() {
                return bad("class vector length mismatch");
            }
            if p.pred_class.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return bad("class probability outside [0, 1]");
            }
            if (p.pred_class.iter().sum::<f64>() - 1.0).abs() > SUM_TOLERANCE {
                return bad("class probabilities do not sum to 1");
            }
            let ones = p.gt_class.iter().filter(|&&v| v == 1.0).count();
            if ones != 1 || p.gt_class.iter().any(|&v| v != 0.0 && v != 1.0) {
                return bad("class target is not one-hot");
            }
        }
        Ok(())
    }
}

fn clamp_prob(p: f64) -> (f64, bool) {
    let c = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (c, c == p)
}

/// Binary log loss and its derivative in `p`; derivative is 0 where clamped.
fn binary_logloss(p: f64, target: bool) -> (f64, f64) {
    let (c, inside) = clamp_prob(p);
    let (loss, grad) = if target { (-c.ln(), -1.0 / c) } else { (-(1.0 - c).ln(), 1.0 / (1.0 - c)) };
    (loss, if inside { grad } else { 0.0 })
}

/// Euclidean distance of two boxes as 4-vectors, with gradient in the prediction.
fn box_distance(pred: &BoundingBox, gt: &BoundingBox) -> (f64, [f64; 4]) {
    let d: Vec<f64> = pred.as_array().iter().zip(gt.as_array()).map(|(a, b)| a - b).collect();
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (0.0, [0.0; 4]);
    }
    (norm, [d[0] / norm, d[1] / norm, d[2] / norm, d[3] / norm])
}

/// Weighted sum over proposals of class cross-entropy, the distances of both
/// predicted boxes to the target box, and the log losses of both objectness
/// predictions. Returns the loss and its analytic gradient.
pub fn detection_loss(batch: &DetectionBatch, w: &LossWeights) -> Result<(f64, LossGradients)> {
    batch.validate()?;
    if [w.class, w.bbox, w.objectness].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err(DetError::InvalidBatch("loss weights must be finite and non-negative".into()));
    }
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(batch.proposals.len());
    for p in &batch.proposals {
        let mut g = ProposalGradient { class: vec![0.0; p.pred_class.len()], ..Default::default() };

        for (j, (&q, &y)) in p.pred_class.iter().zip(&p.gt_class).enumerate() {
            if y != 0.0 {
                let (c, inside) = clamp_prob(q);
                total += -w.class * y * c.ln();
                if inside {
                    g.class[j] = -w.class * y / c;
                }
            }
        }

        let (d1, g1) = box_distance(&p.pred_box1, &p.gt_box);
        let (d2, g2) = box_distance(&p.pred_box2, &p.gt_box);
        total += w.bbox * (d1 + d2);
        g.box1 = g1.map(|v| w.bbox * v);
        g.box2 = g2.map(|v| w.bbox * v);

        let (l1, o1) = binary_logloss(p.pred_obj1, p.gt_obj);
        let (l2, o2) = binary_logloss(p.pred_obj2, p.gt_obj);
        total += w.objectness * (l1 + l2);
        g.obj1 = w.objectness * o1;
        g.obj2 = w.objectness * o2;

        grads.push(g);
    }
    Ok((total, LossGradients { proposals: grads }))
}
