use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EvalError, Result, SweepConfig, SweepReport};
use crate::corpus::LabeledFeatureSet;
use crate::head::ClassifierHead;
use crate::rng;

const ANCHOR_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub ratio: f64,
    pub top1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quartiles by linear interpolation between order statistics at position
/// `p · (n − 1)` of the sorted values.
pub fn quantiles(values: &[f64]) -> Result<FiveNumberSummary> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let at = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    };
    Ok(FiveNumberSummary {
        min: sorted[0],
        q1: at(0.25),
        median: at(0.5),
        q3: at(0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// `start, start + step, …` up to and including `end`. Values are rounded to
/// 1e-9 so the grid prints cleanly.
pub fn ratio_grid(cfg: &SweepConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for i in 0.. {
        let r = cfg.ratio_start + i as f64 * cfg.ratio_step;
        if r > cfg.ratio_end + 1e-9 {
            break;
        }
        out.push((r * 1e9).round() / 1e9);
    }
    Ok(out)
}

/// Test examples of the base classes and every added class but the newest.
pub fn old_pool(base_test: &LabeledFeatureSet, added_tests: &[LabeledFeatureSet]) -> Result<LabeledFeatureSet> {
    let older = &added_tests[..added_tests.len().saturating_sub(1)];
    Ok(LabeledFeatureSet::merge(std::iter::once(base_test).chain(older))?)
}

/// `count` indices into `0..len`: without replacement when the pool is big
/// enough, with replacement otherwise.
fn draw(rng: &mut rng::Rng, len: usize, count: usize) -> Vec<usize> {
    if count <= len {
        index::sample(rng, len, count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..len)).collect()
    }
}

/// Top-1 accuracy of `head` on `M` samples drawn from the old pool plus
/// `round(ratio · M)` drawn from the newest class's test set.
pub fn dynamic_eval(
    head: &ClassifierHead,
    base_test: &LabeledFeatureSet,
    added_tests: &[LabeledFeatureSet],
    ratio: f64,
    old_samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(EvalError::InvalidConfig("ratio must be positive"));
    }
    if old_samples == 0 {
        return Err(EvalError::InvalidConfig("old sample count must be positive"));
    }
    let newest = added_tests.last().ok_or(EvalError::EmptyNewestPool)?;
    if newest.is_empty() {
        return Err(EvalError::EmptyNewestPool);
    }
    let old = old_pool(base_test, added_tests)?;
    if old.is_empty() {
        return Err(EvalError::EmptyOldPool);
    }
    head.check_set(&old)?;
    head.check_set(newest)?;

    let new_count = (ratio * old_samples as f64).round() as usize;
    let mut rng = rng::rng(seed);
    let old_idx = draw(&mut rng, old.len(), old_samples);
    let new_idx = draw(&mut rng, newest.len(), new_count);

    let mut correct = 0usize;
    for (set, idx) in [(&old, &old_idx), (newest, &new_idx)] {
        for &i in idx {
            let name = set.label_name(i);
            let truth = head.class_index(name).ok_or_else(|| EvalError::UnknownClass(name.to_string()))?;
            if head.classify(&set.examples()[i].features)? == truth {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / (old_idx.len() + new_idx.len()) as f64)
}

/// Dynamic evaluation at every grid ratio, its five-number summary and the
/// accuracy at the anchor ratio.
pub fn ratio_sweep(
    head: &ClassifierHead,
    base_test: &LabeledFeatureSet,
    added_tests: &[LabeledFeatureSet],
    cfg: &SweepConfig,
) -> Result<SweepReport> {
    let grid = ratio_grid(cfg)?;
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let top1 = dynamic_eval(
                head,
                base_test,
                added_tests,
                ratio,
                cfg.old_sample_count,
                rng::derive(cfg.seed, i as u64),
            )?;
            Ok(RatioPoint { ratio, top1 })
        })
        .collect::<Result<Vec<_>>>()?;
    let accuracies: Vec<f64> = points.iter().map(|p| p.top1).collect();
    let anchor_accuracy = dynamic_eval(
        head,
        base_test,
        added_tests,
        cfg.anchor_ratio,
        cfg.old_sample_count,
        rng::derive(cfg.seed, ANCHOR_STREAM),
    )?;
    let newest = added_tests.last().ok_or(EvalError::EmptyNewestPool)?;
    let class_name = newest
        .examples()
        .first()
        .and_then(|e| newest.class_name(e.label))
        .unwrap_or_default()
        .to_string();
    Ok(SweepReport {
        class_name,
        summary: quantiles(&accuracies)?,
        points,
        anchor_ratio: cfg.anchor_ratio,
        anchor_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ClassLabel;

    #[test]
    fn grid_has_23_points() {
        let g = ratio_grid(&SweepConfig::default()).unwrap();
        assert_eq!(g.len(), 23);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[2], 0.09);
        assert_eq!(*g.last().unwrap(), 0.49);
    }

    #[test]
    fn quantile_cases() {
        let q = quantiles(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        let q = quantiles(&[0.7]).unwrap();
        assert_eq!((q.min, q.q1, q.median, q.q3, q.max), (0.7, 0.7, 0.7, 0.7, 0.7));
        assert_eq!(quantiles(&[4.0, 1.0, 3.0, 2.0]).unwrap(), quantiles(&[1.0, 2.0, 3.0, 4.0]).unwrap());
        // interpolated: positions 0.75, 1.5, 2.25
        let q = quantiles(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
        assert!(quantiles(&[]).is_err());
    }

    fn one_class(name: &str, x: f64, n: usize) -> LabeledFeatureSet {
        let mut s = LabeledFeatureSet::new(2, vec![ClassLabel { id: 0, name: name.into() }]).unwrap();
        for _ in 0..n {
            s.push(0, vec![x, 1.0 - x]).unwrap();
        }
        s
    }

    fn perfect_head() -> ClassifierHead {
        let names = vec!["a".to_string(), "b".to_string()];
        ClassifierHead::from_parts(2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2], &names, None).unwrap()
    }

    #[test]
    fn perfect_classifier_and_determinism() {
        let head = perfect_head();
        let base = one_class("a", 1.0, 50);
        let added = [one_class("b", 0.0, 20)];
        assert_eq!(dynamic_eval(&head, &base, &added, 0.3, 100, 1).unwrap(), 1.0);
        // a head that always answers "a" is right only on the old samples
        let dumb = ClassifierHead::from_parts(2, vec![0.0; 4], vec![1.0, 0.0], &["a".into(), "b".into()], None).unwrap();
        let acc = dynamic_eval(&dumb, &base, &added, 0.1, 1000, 5).unwrap();
        assert_eq!(acc, 1000.0 / 1100.0);
        assert_eq!(
            dynamic_eval(&dumb, &base, &added, 0.37, 333, 9).unwrap(),
            dynamic_eval(&dumb, &base, &added, 0.37, 333, 9).unwrap()
        );
    }

    #[test]
    fn errors() {
        let head = perfect_head();
        let base = one_class("a", 1.0, 5);
        assert!(matches!(dynamic_eval(&head, &base, &[], 0.1, 10, 0), Err(EvalError::EmptyNewestPool)));
        let empty = LabeledFeatureSet::new(2, vec![ClassLabel { id: 0, name: "b".into() }]).unwrap();
        assert!(matches!(
            dynamic_eval(&head, &base, &[empty], 0.1, 10, 0),
            Err(EvalError::EmptyNewestPool)
        ));
        let unknown = [one_class("zzz", 0.0, 3)];
        assert!(matches!(
            dynamic_eval(&head, &base, &unknown, 0.5, 10, 0),
            Err(EvalError::UnknownClass(_))
        ));
    }

    #[test]
    fn old_pool_grows_with_previous_tests() {
        let base = one_class("a", 1.0, 5);
        let b = one_class("b", 0.0, 3);
        let c = one_class("c", 0.5, 4);
        let pool1 = old_pool(&base, std::slice::from_ref(&b)).unwrap();
        assert_eq!(pool1.len(), 5);
        let pool2 = old_pool(&base, &[b.clone(), c]).unwrap();
        assert_eq!(pool2.len(), 8);
        let bid = pool2.class_id("b").unwrap();
        assert_eq!(pool2.class_counts()[&bid], 3);
    }
}
