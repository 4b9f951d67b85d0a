//! Reference implementations used as test oracles. They favour directness
//! over speed and share no code with the library beyond its data types.
#![allow(dead_code)]

use std::collections::BTreeMap;

use openset_core::detmath::{BoundingBox, Detection, DetectionBatch, GroundTruth, Proposal, ProposalGradient};
use openset_core::session::{EventKind, Phase};
use openset_core::{ClassLabel, ClassifierHead, LabeledFeatureSet};
use rand::Rng;

pub fn overlap(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let x0 = a.x.max(b.x);
    let y0 = a.y.max(b.y);
    let x1 = (a.x + a.w).min(b.x + b.w);
    let y1 = (a.y + a.h).min(b.y + b.h);
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let inter = (x1 - x0) * (y1 - y0);
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Detection indices by descending score, ties by input position.
fn ranked(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // insertion sort: stable by construction
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 && dets[order[j - 1]].score < dets[order[j]].score {
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    order
}

/// True-positive count among the first `k` ranked detections, matching from
/// scratch: each detection claims the first unclaimed same-label ground
/// truth of maximal IoU, and counts if that IoU exceeds `thr`.
fn true_positives_in_prefix(dets: &[Detection], order: &[usize], gts: &[GroundTruth], thr: f64, k: usize) -> usize {
    let mut claimed = vec![false; gts.len()];
    let mut tp = 0;
    for &d in &order[..k] {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if claimed[g] || gt.label != dets[d].label {
                continue;
            }
            let v = overlap(&dets[d].bbox, &gt.bbox);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((g, v));
            }
        }
        if let Some((g, v)) = best {
            if v > thr {
                claimed[g] = true;
                tp += 1;
            }
        }
    }
    tp
}

/// Average precision by enumerating the PR curve: one point per ranked
/// prefix, recall steps of `1/G` weighted by the best precision at any
/// recall at least as large.
pub fn brute_force_ap(dets: &[Detection], gts: &[GroundTruth], thr: f64) -> f64 {
    if gts.is_empty() {
        return 0.0;
    }
    let order = ranked(dets);
    let tps: Vec<usize> = (0..=dets.len()).map(|k| true_positives_in_prefix(dets, &order, gts, thr, k)).collect();
    let precision = |k: usize| tps[k] as f64 / k as f64;
    let mut sum = 0.0;
    for k in 1..=dets.len() {
        if tps[k] > tps[k - 1] {
            let best = (k..=dets.len()).map(precision).fold(f64::NEG_INFINITY, f64::max);
            sum += best;
        }
    }
    sum / gts.len() as f64
}

/// Min, quartiles and max by sorting and interpolating at `p·(n−1)`, with
/// the position split into integer and fractional parts exactly.
pub fn quartile_oracle(values: &[f64]) -> [f64; 5] {
    let mut v = values.to_vec();
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            j -= 1;
        }
    }
    let n = v.len();
    let q = |quarters: usize| {
        let num = quarters * (n - 1);
        let (lo, rem) = (num / 4, num % 4);
        if rem == 0 {
            v[lo]
        } else {
            v[lo] + (rem as f64 / 4.0) * (v[lo + 1] - v[lo])
        }
    };
    [v[0], q(1), q(2), q(3), v[n - 1]]
}

/// Total-variation distance between empirical counts and a distribution.
pub fn total_variation(counts: &BTreeMap<u16, usize>, dist: &BTreeMap<u16, f64>) -> f64 {
    let n: usize = counts.values().sum();
    let keys: std::collections::BTreeSet<u16> = counts.keys().chain(dist.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| {
            let emp = counts.get(k).copied().unwrap_or(0) as f64 / n as f64;
            (emp - dist.get(k).copied().unwrap_or(0.0)).abs()
        })
        .sum::<f64>()
}

/// Central difference of `f` at `x`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Proposal predictions flattened as box1, box2, obj1, obj2, class.
pub fn proposal_params(p: &Proposal) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend(p.pred_box1.as_array());
    v.extend(p.pred_box2.as_array());
    v.push(p.pred_obj1);
    v.push(p.pred_obj2);
    v.extend(&p.pred_class);
    v
}

pub fn set_proposal_param(p: &mut Proposal, i: usize, value: f64) {
    let set_box = |b: &mut BoundingBox, j: usize| match j {
        0 => b.x = value,
        1 => b.y = value,
        2 => b.w = value,
        _ => b.h = value,
    };
    match i {
        0..=3 => set_box(&mut p.pred_box1, i),
        4..=7 => set_box(&mut p.pred_box2, i - 4),
        8 => p.pred_obj1 = value,
        9 => p.pred_obj2 = value,
        _ => p.pred_class[i - 10] = value,
    }
}

pub fn gradient_params(g: &ProposalGradient) -> Vec<f64> {
    let mut v = Vec::new();
    v.extend(g.box1);
    v.extend(g.box2);
    v.push(g.obj1);
    v.push(g.obj2);
    v.extend(&g.class);
    v
}

fn random_box(rng: &mut impl Rng) -> BoundingBox {
    BoundingBox {
        x: rng.random_range(-50.0..200.0),
        y: rng.random_range(-50.0..200.0),
        w: rng.random_range(4.0..120.0),
        h: rng.random_range(4.0..120.0),
    }
}

/// Valid batch of 1–`max_k` proposals with probabilities kept away from the
/// log clamp and from the edges of `[0, 1]`.
pub fn random_batch(rng: &mut impl Rng, max_k: usize) -> DetectionBatch {
    let k = rng.random_range(1..=max_k);
    let proposals = (0..k)
        .map(|_| {
            let n = rng.random_range(2..=6);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let pred_class: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let mut gt_class = vec![0.0; n];
            gt_class[rng.random_range(0..n)] = 1.0;
            Proposal {
                pred_box1: random_box(rng),
                pred_box2: random_box(rng),
                pred_obj1: rng.random_range(0.05..0.95),
                pred_obj2: rng.random_range(0.05..0.95),
                pred_class,
                gt_box: random_box(rng),
                gt_obj: rng.random_bool(0.5),
                gt_class,
            }
        })
        .collect();
    DetectionBatch { proposals }
}

/// Detections and ground truths on a coarse grid, so ties in score and IoU
/// and IoUs exactly at the threshold occur often.
pub fn random_detection_case(rng: &mut impl Rng, max_dets: usize) -> (Vec<Detection>, Vec<GroundTruth>) {
    let grid_box = |rng: &mut dyn rand::RngCore| BoundingBox {
        x: (rng.next_u32() % 4) as f64 * 5.0,
        y: (rng.next_u32() % 3) as f64 * 5.0,
        w: (1 + rng.next_u32() % 3) as f64 * 5.0,
        h: (1 + rng.next_u32() % 3) as f64 * 5.0,
    };
    let n_det = rng.random_range(0..=max_dets);
    let n_gt = rng.random_range(0..=5);
    let dets = (0..n_det)
        .map(|_| Detection {
            bbox: grid_box(rng),
            score: rng.random_range(0..5) as f64 / 4.0,
            label: rng.random_range(0..3),
        })
        .collect();
    let gts = (0..n_gt).map(|_| GroundTruth { bbox: grid_box(rng), label: rng.random_range(0..3) }).collect();
    (dets, gts)
}

/// Expected next phase of the teaching session, or `None` when the event must
/// be rejected. `payload_ok` says whether the event's payload is acceptable.
pub fn expected_transition(phase: Phase, event: EventKind, payload_ok: bool, collected: usize) -> Option<Phase> {
    use EventKind as E;
    use Phase as P;
    match (phase, event) {
        (_, E::Abort) => Some(P::Idle),
        (P::Idle, E::StartSession) => Some(P::EnumerateWorld),
        (P::EnumerateWorld, E::RequestWorld) => Some(P::AwaitCorrection),
        (P::AwaitCorrection, E::Correct) if payload_ok => Some(P::Collecting),
        (P::Collecting, E::AddSample) if payload_ok => Some(P::Collecting),
        (P::Collecting, E::FinishCollection) if collected >= 1 => Some(P::Retraining),
        (P::Retraining, E::RetrainDone) => Some(P::Idle),
        _ => None,
    }
}

/// Feature set over classes named `names`, ids in order.
pub fn labeled_set(dim: usize, names: &[&str], examples: impl IntoIterator<Item = (u16, Vec<f64>)>) -> LabeledFeatureSet {
    let table = names.iter().enumerate().map(|(id, n)| ClassLabel { id: id as u16, name: n.to_string() }).collect();
    let mut set = LabeledFeatureSet::new(dim, table).unwrap();
    for (label, x) in examples {
        set.push(label, x).unwrap();
    }
    set
}

/// Base head over `n` classes `c0 … c{n-1}` with uniform random parameters.
pub fn random_head(rng: &mut impl Rng, dim: usize, n: usize) -> ClassifierHead {
    let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let weights = (0..dim * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let biases = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    ClassifierHead::from_parts(dim, weights, biases, &names, None).unwrap()
}

/// Binary logistic regression by full-batch gradient descent from zero.
/// Returns `[θ₁ … θ_d, b]`.
pub fn full_batch_logistic(positives: &[Vec<f64>], negatives: &[Vec<f64>], learning_rate: f64, iterations: usize) -> Vec<f64> {
    let dim = positives[0].len();
    let data: Vec<(&Vec<f64>, f64)> =
        positives.iter().map(|x| (x, 1.0)).chain(negatives.iter().map(|x| (x, 0.0))).collect();
    let mut w = vec![0.0; dim + 1];
    for _ in 0..iterations {
        let mut g = vec![0.0; dim + 1];
        for (x, y) in &data {
            let s: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[dim];
            let r = 1.0 / (1.0 + (-s).exp()) - y;
            for (gi, xi) in g.iter_mut().zip(x.iter()) {
                *gi += r * xi;
            }
            g[dim] += r;
        }
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= learning_rate * gi / data.len() as f64;
        }
    }
    w
}

/// Fraction of examples on the correct side of the score `θᵀx + b = 0`.
pub fn binary_accuracy(params: &[f64], positives: &[Vec<f64>], negatives: &[Vec<f64>]) -> f64 {
    let dim = params.len() - 1;
    let score = |x: &Vec<f64>| x.iter().zip(&params[..dim]).map(|(a, b)| a * b).sum::<f64>() + params[dim];
    let hits = positives.iter().filter(|x| score(x) > 0.0).count() + negatives.iter().filter(|x| score(x) < 0.0).count();
    hits as f64 / (positives.len() + negatives.len()) as f64
}
