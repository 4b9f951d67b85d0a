use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{ClassifierHead, ConfusionDistribution, HeadError, Result};
use crate::corpus::{ClassLabel, LabeledFeatureSet};
use crate::rng;

/// Splits `set` into per-class pools keyed by `head`'s class ids, matching
/// classes by name. Classes without examples are left out.
pub fn pools_by_class(head: &ClassifierHead, set: &LabeledFeatureSet) -> Result<BTreeMap<u16, LabeledFeatureSet>> {
    head.check_set(set)?;
    let mut pools = BTreeMap::new();
    for c in set.classes() {
        let id = head.class_index(&c.name).ok_or_else(|| HeadError::UnknownClass(c.name.clone()))?;
        let pool = set.filter_class(c.id);
        if !pool.is_empty() {
            pools.insert(id, pool);
        }
    }
    Ok(pools)
}

/// Draws `count` negatives i.i.d.: a class with probability from `dist`, then
/// a uniform example of that class's pool (with replacement). The output is
/// labeled with the head class ids used as pool keys.
pub fn sample_negatives(
    pools: &BTreeMap<u16, LabeledFeatureSet>,
    dist: &ConfusionDistribution,
    count: usize,
    seed: u64,
) -> Result<LabeledFeatureSet> {
    if count == 0 {
        return Err(HeadError::InvalidConfig("negative count must be positive"));
    }
    let support: Vec<(u16, f64)> = dist.probs.iter().filter(|(_, p)| **p > 0.0).map(|(k, p)| (*k, *p)).collect();
    if support.is_empty() {
        return Err(HeadError::InvalidConfig("draw distribution has no mass"));
    }
    let mut dim = None;
    let mut table = Vec::with_capacity(support.len());
    for &(id, _) in &support {
        let pool = match pools.get(&id) {
            Some(p) if !p.is_empty() => p,
            _ => return Err(HeadError::EmptyPool(id)),
        };
        match dim {
            None => dim = Some(pool.dim()),
            Some(d) if d != pool.dim() => {
                return Err(HeadError::DimensionMismatch { expected: d, found: pool.dim() })
            }
            _ => {}
        }
        let name = match pool.class_name(pool.examples()[0].label) {
            Some(n) if !table.iter().any(|c: &ClassLabel| c.name == n) => n.to_string(),
            _ => format!("class-{id}"),
        };
        table.push(ClassLabel { id, name });
    }
    let index = WeightedIndex::new(support.iter().map(|(_, p)| *p))
        .map_err(|_| HeadError::InvalidConfig("invalid draw distribution"))?;

    let mut out = LabeledFeatureSet::new(dim.unwrap_or(1), table)
        .map_err(|_| HeadError::InvalidConfig("invalid pool class table"))?;
    let mut sources = support.iter().map(|(id, _)| pools[id].source());
    let first = sources.next().flatten().copied();
    if sources.all(|s| s.copied() == first) {
        out = out.with_source(first);
    }
    let mut rng = rng::rng(seed);
    for _ in 0..count {
        let id = support[index.sample(&mut rng)].0;
        let pool = &pools[&id];
        let pick = rng.random_range(0..pool.len());
        out.push(id, pool.examples()[pick].features.clone())
            .map_err(|_| HeadError::InvalidConfig("pool example rejected"))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(label: &str, value: f64, n: usize) -> LabeledFeatureSet {
        let mut s = LabeledFeatureSet::new(1, vec![ClassLabel { id: 0, name: label.into() }]).unwrap();
        for i in 0..n {
            s.push(0, vec![value + i as f64 * 1e-3]).unwrap();
        }
        s
    }

    #[test]
    fn single_class() {
        let pools = BTreeMap::from([(0, pool("a", 1.0, 4)), (1, pool("b", 2.0, 4))]);
        let dist = ConfusionDistribution { probs: BTreeMap::from([(0, 1.0), (1, 0.0)]) };
        let out = sample_negatives(&pools, &dist, 5, 1).unwrap();
        assert_eq!(out.len(), 5);
        assert!(out.examples().iter().all(|e| e.label == 0 && e.features[0] < 1.5));
    }

    #[test]
    fn frequencies_follow_distribution() {
        let pools = BTreeMap::from([(0, pool("a", 1.0, 10)), (1, pool("b", 2.0, 10))]);
        let dist = ConfusionDistribution { probs: BTreeMap::from([(0, 0.6), (1, 0.4)]) };
        let out = sample_negatives(&pools, &dist, 10_000, 99).unwrap();
        let a = out.examples().iter().filter(|e| e.label == 0).count() as f64 / 10_000.0;
        let tv = ((a - 0.6).abs() + ((1.0 - a) - 0.4).abs()) / 2.0;
        assert!(tv <= 0.02, "tv {tv}");
    }

    #[test]
    fn empty_pool_with_mass_is_an_error() {
        let pools = BTreeMap::from([(0, pool("a", 1.0, 3)), (1, pool("b", 2.0, 0))]);
        let dist = ConfusionDistribution { probs: BTreeMap::from([(0, 0.8), (1, 0.2)]) };
        assert!(matches!(sample_negatives(&pools, &dist, 5, 1), Err(HeadError::EmptyPool(1))));
        let missing = BTreeMap::from([(0, pool("a", 1.0, 3))]);
        assert!(matches!(sample_negatives(&missing, &dist, 5, 1), Err(HeadError::EmptyPool(1))));
    }

    #[test]
    fn deterministic() {
        let pools = BTreeMap::from([(0, pool("a", 1.0, 10)), (1, pool("b", 2.0, 10))]);
        let dist = ConfusionDistribution { probs: BTreeMap::from([(0, 0.5), (1, 0.5)]) };
        assert_eq!(
            sample_negatives(&pools, &dist, 50, 7).unwrap(),
            sample_negatives(&pools, &dist, 50, 7).unwrap()
        );
    }
}
