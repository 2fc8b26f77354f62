//! Proportion and coverage metrics over tested-scenario archives.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::risk::ScenarioClass;
use crate::search::RunResult;

/// One algorithm's archive split by risk class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassifiedSets {
    sets: [HashSet<usize>; 5],
}

impl ClassifiedSets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_run(run: &RunResult) -> Self {
        Self::from_pairs(run.log.iter().map(|r| (r.scenario.index, r.result.class)))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, ScenarioClass)>) -> Self {
        let mut out = Self::new();
        for (idx, class) in pairs {
            out.insert(idx, class);
        }
        out
    }

    /// Panics if `index` is already filed under a different class.
    pub fn insert(&mut self, index: usize, class: ScenarioClass) {
        for (k, set) in self.sets.iter().enumerate() {
            assert!(
                k == class.ordinal() || !set.contains(&index),
                "scenario {index} classified twice"
            );
        }
        self.sets[class.ordinal()].insert(index);
    }

    pub fn get(&self, class: ScenarioClass) -> &HashSet<usize> {
        &self.sets[class.ordinal()]
    }

    pub fn len(&self) -> usize {
        self.sets.iter().map(HashSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.sets.iter().flat_map(|s| s.iter().copied())
    }

    /// Indices in any of the given classes.
    pub fn union_of(&self, classes: &[ScenarioClass]) -> HashSet<usize> {
        classes
            .iter()
            .flat_map(|c| self.get(*c).iter().copied())
            .collect()
    }
}

/// Class shares of an archive, in `ScenarioClass::ALL` order.
pub fn proportion(sets: &ClassifiedSets) -> Result<[f64; 5]> {
    let n = sets.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "proportion of an empty archive".into(),
        ));
    }
    Ok(std::array::from_fn(|k| {
        sets.sets[k].len() as f64 / n as f64
    }))
}

/// |Ω_i^c| over the union of class `c` across all compared algorithms.
/// `None` when no algorithm found anything in that class.
pub fn coverage(all: &[ClassifiedSets], class: ScenarioClass, i: usize) -> Option<f64> {
    coverage_of(all, &[class], i)
}

/// Like [`coverage`] for a union of classes.
pub fn coverage_of(all: &[ClassifiedSets], classes: &[ScenarioClass], i: usize) -> Option<f64> {
    let union: HashSet<usize> = all.iter().flat_map(|s| s.union_of(classes)).collect();
    if union.is_empty() {
        return None;
    }
    Some(all[i].union_of(classes).len() as f64 / union.len() as f64)
}

/// Ground-truth class of every grid scenario, by flat index.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMap {
    classes: Vec<ScenarioClass>,
    counts: [usize; 5],
}

impl OracleMap {
    pub fn new(classes: Vec<ScenarioClass>) -> Self {
        let mut counts = [0; 5];
        for c in &classes {
            counts[c.ordinal()] += 1;
        }
        OracleMap { classes, counts }
    }

    pub fn class(&self, index: usize) -> Option<ScenarioClass> {
        self.classes.get(index).copied()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn count(&self, class: ScenarioClass) -> usize {
        self.counts[class.ordinal()]
    }
}

/// Share of the oracle's class-`c` scenarios that the archive contains.
/// Classes are taken from the oracle, so the result does not depend on how
/// the run's own evaluator labelled them. `None` when the oracle class is
/// empty; an error when an archived index lies outside the oracle.
pub fn coverage_vs_oracle(
    sets: &ClassifiedSets,
    oracle: &OracleMap,
    class: ScenarioClass,
) -> Result<Option<f64>> {
    coverage_vs_oracle_of(sets, oracle, &[class])
}

pub fn coverage_vs_oracle_of(
    sets: &ClassifiedSets,
    oracle: &OracleMap,
    classes: &[ScenarioClass],
) -> Result<Option<f64>> {
    let total: usize = classes.iter().map(|c| oracle.count(*c)).sum();
    let mut hit = 0usize;
    for idx in sets.indices() {
        let c = oracle.class(idx).ok_or(Error::IndexOutOfRange {
            index: idx,
            cardinality: oracle.len(),
        })?;
        if classes.contains(&c) {
            hit += 1;
        }
    }
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(hit as f64 / total as f64))
}

/// Crash, near-crash, high-risk and risk.
pub const SAFETY_CRITICAL: [ScenarioClass; 4] = [
    ScenarioClass::Crash,
    ScenarioClass::NearCrash,
    ScenarioClass::HighRisk,
    ScenarioClass::Risk,
];

/// Median of a non-empty slice (mean of the two middle values for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    })
}
