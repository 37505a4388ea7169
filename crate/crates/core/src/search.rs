//! Best-division search for one cluster.
//!
//! Numeric features are scanned with a sorted threshold sweep: rows move from
//! `C_b` to `C_a` one distinct value at a time and the objective is re-scored
//! after each move, so each feature costs one sort plus a linear pass.
//! Categorical features try splitting off each observed category in turn.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{counts_over_time, CountSeries, Dataset, FeatureKind, FeatureValue};
use crate::objective::{ObjectiveError, ObjectiveSpec, Score};

/// Relative tolerance used to call two custom-objective scores equal.
pub const CUSTOM_SCORE_RTOL: f64 = 1e-12;

/// Where rows with a missing value go under a numeric threshold rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MissingSide {
    A,
    B,
}

/// Category token of a [`SplitRule::CategoryEq`]. `Missing` is the reserved
/// token for absent values and sorts after every real category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Option<String>", into = "Option<String>")]
pub enum CategoryKey {
    Value(String),
    Missing,
}

impl CategoryKey {
    pub fn of(value: &FeatureValue) -> Option<CategoryKey> {
        match value {
            FeatureValue::Category(c) => Some(CategoryKey::Value(c.clone())),
            FeatureValue::Missing => Some(CategoryKey::Missing),
            FeatureValue::Numeric(_) => None,
        }
    }
}

impl From<Option<String>> for CategoryKey {
    fn from(v: Option<String>) -> Self {
        v.map_or(CategoryKey::Missing, CategoryKey::Value)
    }
}

impl From<CategoryKey> for Option<String> {
    fn from(k: CategoryKey) -> Self {
        match k {
            CategoryKey::Value(v) => Some(v),
            CategoryKey::Missing => None,
        }
    }
}

impl fmt::Display for CategoryKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CategoryKey::Value(v) => write!(f, "{v:?}"),
            CategoryKey::Missing => f.write_str("<missing>"),
        }
    }
}

/// Binary predicate on one feature. Rows satisfying it form `C_a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SplitRule {
    #[serde(rename = "numeric")]
    NumericLe {
        feature: String,
        threshold: f64,
        missing_side: MissingSide,
    },
    #[serde(rename = "categorical")]
    CategoryEq {
        feature: String,
        category: CategoryKey,
    },
}

impl SplitRule {
    pub fn feature(&self) -> &str {
        match self {
            SplitRule::NumericLe { feature, .. } | SplitRule::CategoryEq { feature, .. } => feature,
        }
    }

    pub fn kind(&self) -> FeatureKind {
        match self {
            SplitRule::NumericLe { .. } => FeatureKind::Numeric,
            SplitRule::CategoryEq { .. } => FeatureKind::Categorical,
        }
    }

    /// `Some(true)` when the value belongs to `C_a`; `None` when the value's
    /// kind does not fit the rule.
    pub fn goes_to_a(&self, value: &FeatureValue) -> Option<bool> {
        match (self, value) {
            (
                SplitRule::NumericLe {
                    threshold,
                    missing_side,
                    ..
                },
                v,
            ) => match v {
                FeatureValue::Numeric(x) => Some(*x <= *threshold),
                FeatureValue::Missing => Some(*missing_side == MissingSide::A),
                FeatureValue::Category(_) => None,
            },
            (SplitRule::CategoryEq { category, .. }, v) => match v {
                FeatureValue::Category(c) => {
                    Some(matches!(category, CategoryKey::Value(k) if k == c))
                }
                FeatureValue::Missing => Some(*category == CategoryKey::Missing),
                FeatureValue::Numeric(_) => None,
            },
        }
    }

    /// Orders rules on the same feature for tie-breaking: smaller threshold
    /// first, then missing side A before B; categories lexicographically.
    fn tie_order(&self, other: &SplitRule) -> Ordering {
        match (self, other) {
            (
                SplitRule::NumericLe {
                    threshold: t1,
                    missing_side: s1,
                    ..
                },
                SplitRule::NumericLe {
                    threshold: t2,
                    missing_side: s2,
                    ..
                },
            ) => t1.total_cmp(t2).then(s1.cmp(s2)),
            (SplitRule::CategoryEq { category: c1, .. }, SplitRule::CategoryEq { category: c2, .. }) => {
                c1.cmp(c2)
            }
            (SplitRule::NumericLe { .. }, SplitRule::CategoryEq { .. }) => Ordering::Less,
            (SplitRule::CategoryEq { .. }, SplitRule::NumericLe { .. }) => Ordering::Greater,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub rule: SplitRule,
    /// Schema position of the rule's feature.
    pub feature_index: usize,
    pub score: Score,
    pub size_a: usize,
    pub size_b: usize,
    pub counts_a: CountSeries,
    pub counts_b: CountSeries,
}

impl SplitCandidate {
    pub fn is_feasible(&self, min_size: usize) -> bool {
        self.size_a >= min_size.max(1) && self.size_b >= min_size.max(1)
    }
}

/// How the minimum child size interacts with the maximisation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Maximise over size-feasible candidates only.
    #[default]
    Constrained,
    /// Maximise over all bipartitions, then discard the winner if infeasible.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),
    #[error("feature '{feature}' is {actual}, expected {expected}")]
    WrongKind {
        feature: String,
        expected: FeatureKind,
        actual: FeatureKind,
    },
    #[error("row {row}: value of feature '{feature}' does not match its schema kind")]
    BadValue { row: usize, feature: String },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}

/// Compares scores: `Greater` when `a` beats `b`.
pub fn compare_scores(objective: &ObjectiveSpec, a: Score, b: Score) -> Ordering {
    if objective.is_exact() {
        return a.0.total_cmp(&b.0);
    }
    let scale = a.0.abs().max(b.0.abs());
    if (a.0 - b.0).abs() <= CUSTOM_SCORE_RTOL * scale {
        Ordering::Equal
    } else {
        a.0.total_cmp(&b.0)
    }
}

/// True when `challenger` should replace `incumbent`: higher score, or equal
/// score and earlier in (feature index, rule order).
pub fn prefer(objective: &ObjectiveSpec, challenger: &SplitCandidate, incumbent: &SplitCandidate) -> bool {
    match compare_scores(objective, challenger.score, incumbent.score) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => {
            let by_feature = challenger.feature_index.cmp(&incumbent.feature_index);
            by_feature.then_with(|| challenger.rule.tie_order(&incumbent.rule)) == Ordering::Less
        }
    }
}

/// One position of the numeric sweep, after all rows with value `<= threshold`
/// have moved into `C_a`.
#[derive(Debug)]
pub struct SweepStep<'a> {
    pub threshold: f64,
    pub missing_side: MissingSide,
    pub counts_a: &'a [u64],
    pub counts_b: &'a [u64],
    pub size_a: usize,
    pub size_b: usize,
}

/// Work done by one numeric sweep, for checking the cost bound.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub sorts: usize,
    /// Row moves from `C_b` to `C_a`, one entry per pinning pass.
    pub moves_per_pass: Vec<usize>,
}

/// Runs the threshold sweep of one numeric feature over `cluster` and calls
/// `visit` at every distinct observed value.
///
/// When the cluster holds missing values for the feature the sweep is run
/// twice, with missing rows pinned first in `C_a` and then in `C_b`;
/// otherwise once, with missing rows (none) nominally routed to `C_b`.
pub fn sweep_numeric<F>(
    dataset: &Dataset,
    cluster: &[usize],
    feature: usize,
    mut visit: F,
) -> Result<SweepStats, SearchError>
where
    F: FnMut(&SweepStep<'_>) -> Result<(), SearchError>,
{
    let steps = dataset.num_steps();
    let name = &dataset.schema().feature(feature).name;
    let mut present: Vec<(f64, usize)> = Vec::with_capacity(cluster.len());
    let mut missing = vec![0u64; steps];
    let mut n_missing = 0usize;
    let mut parent = vec![0u64; steps];
    for &r in cluster {
        let row = &dataset.rows()[r];
        parent[row.step] += 1;
        match &row.values[feature] {
            FeatureValue::Numeric(v) => present.push((*v, row.step)),
            FeatureValue::Missing => {
                missing[row.step] += 1;
                n_missing += 1;
            }
            FeatureValue::Category(_) => {
                return Err(SearchError::BadValue {
                    row: r,
                    feature: name.clone(),
                })
            }
        }
    }
    present.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut stats = SweepStats {
        sorts: 1,
        moves_per_pass: Vec::new(),
    };

    let passes: &[MissingSide] = if n_missing > 0 {
        &[MissingSide::A, MissingSide::B]
    } else {
        &[MissingSide::B]
    };
    for &side in passes {
        let (mut counts_a, mut size_a) = match side {
            MissingSide::A => (missing.clone(), n_missing),
            MissingSide::B => (vec![0u64; steps], 0),
        };
        let mut counts_b: Vec<u64> = parent.iter().zip(&counts_a).map(|(p, a)| p - a).collect();
        let mut moves = 0usize;
        let mut i = 0;
        while i < present.len() {
            let value = present[i].0;
            // rows with equal values move together; -0.0 and 0.0 are one value
            while i < present.len() && present[i].0 == value {
                let step = present[i].1;
                counts_a[step] += 1;
                counts_b[step] -= 1;
                size_a += 1;
                moves += 1;
                i += 1;
            }
            visit(&SweepStep {
                threshold: value + 0.0,
                missing_side: side,
                counts_a: &counts_a,
                counts_b: &counts_b,
                size_a,
                size_b: cluster.len() - size_a,
            })?;
        }
        stats.moves_per_pass.push(moves);
    }
    Ok(stats)
}

fn resolve(dataset: &Dataset, feature: &str, expected: FeatureKind) -> Result<usize, SearchError> {
    let index = dataset
        .schema()
        .index_of(feature)
        .ok_or_else(|| SearchError::UnknownFeature(feature.to_string()))?;
    let actual = dataset.schema().feature(index).kind;
    if actual != expected {
        return Err(SearchError::WrongKind {
            feature: feature.to_string(),
            expected,
            actual,
        });
    }
    Ok(index)
}

/// Minimum side size a candidate needs to be considered during maximisation.
fn admission_floor(min_size: usize, mode: SearchMode) -> usize {
    match mode {
        SearchMode::Constrained => min_size.max(1),
        SearchMode::Reject => 1,
    }
}

fn finish(found: Option<SplitCandidate>, min_size: usize) -> Option<SplitCandidate> {
    found.filter(|c| c.is_feasible(min_size))
}

pub(crate) fn numeric_candidate(
    dataset: &Dataset,
    cluster: &[usize],
    feature: usize,
    objective: &ObjectiveSpec,
    floor: usize,
) -> Result<Option<SplitCandidate>, SearchError> {
    let name = dataset.schema().feature(feature).name.clone();
    let mut best: Option<SplitCandidate> = None;
    sweep_numeric(dataset, cluster, feature, |step| {
        if step.size_a < floor || step.size_b < floor {
            return Ok(());
        }
        let score = objective.score_counts(step.counts_a, step.counts_b)?;
        let better = match &best {
            None => true,
            Some(b) => match compare_scores(objective, score, b.score) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => match &b.rule {
                    SplitRule::NumericLe {
                        threshold,
                        missing_side,
                        ..
                    } => step
                        .threshold
                        .total_cmp(threshold)
                        .then(step.missing_side.cmp(missing_side))
                        .is_lt(),
                    SplitRule::CategoryEq { .. } => unreachable!("numeric sweep"),
                },
            },
        };
        if better {
            best = Some(SplitCandidate {
                rule: SplitRule::NumericLe {
                    feature: name.clone(),
                    threshold: step.threshold,
                    missing_side: step.missing_side,
                },
                feature_index: feature,
                score,
                size_a: step.size_a,
                size_b: step.size_b,
                counts_a: CountSeries(step.counts_a.to_vec()),
                counts_b: CountSeries(step.counts_b.to_vec()),
            });
        }
        Ok(())
    })?;
    Ok(best)
}

pub(crate) fn categorical_candidate(
    dataset: &Dataset,
    cluster: &[usize],
    feature: usize,
    objective: &ObjectiveSpec,
    floor: usize,
) -> Result<Option<SplitCandidate>, SearchError> {
    let steps = dataset.num_steps();
    let name = &dataset.schema().feature(feature).name;
    let mut groups: BTreeMap<CategoryKey, (Vec<u64>, usize)> = BTreeMap::new();
    let mut parent = vec![0u64; steps];
    for &r in cluster {
        let row = &dataset.rows()[r];
        let key = CategoryKey::of(&row.values[feature]).ok_or_else(|| SearchError::BadValue {
            row: r,
            feature: name.clone(),
        })?;
        let entry = groups.entry(key).or_insert_with(|| (vec![0; steps], 0));
        entry.0[row.step] += 1;
        entry.1 += 1;
        parent[row.step] += 1;
    }

    let mut best: Option<SplitCandidate> = None;
    // BTreeMap order is the tie-break order, so only strict improvements replace
    for (key, (counts_a, size_a)) in groups {
        let size_b = cluster.len() - size_a;
        if size_a < floor || size_b < floor {
            continue;
        }
        let counts_b: Vec<u64> = parent.iter().zip(&counts_a).map(|(p, a)| p - a).collect();
        let score = objective.score_counts(&counts_a, &counts_b)?;
        if best
            .as_ref()
            .is_none_or(|b| compare_scores(objective, score, b.score) == Ordering::Greater)
        {
            best = Some(SplitCandidate {
                rule: SplitRule::CategoryEq {
                    feature: name.clone(),
                    category: key,
                },
                feature_index: feature,
                score,
                size_a,
                size_b,
                counts_a: CountSeries(counts_a),
                counts_b: CountSeries(counts_b),
            });
        }
    }
    Ok(best)
}

pub fn best_split_numeric(
    dataset: &Dataset,
    cluster: &[usize],
    feature: &str,
    objective: &ObjectiveSpec,
    min_size: usize,
    mode: SearchMode,
) -> Result<Option<SplitCandidate>, SearchError> {
    let index = resolve(dataset, feature, FeatureKind::Numeric)?;
    objective.check_steps(dataset.num_steps())?;
    let found = numeric_candidate(dataset, cluster, index, objective, admission_floor(min_size, mode))?;
    Ok(finish(found, min_size))
}

pub fn best_split_categorical(
    dataset: &Dataset,
    cluster: &[usize],
    feature: &str,
    objective: &ObjectiveSpec,
    min_size: usize,
    mode: SearchMode,
) -> Result<Option<SplitCandidate>, SearchError> {
    let index = resolve(dataset, feature, FeatureKind::Categorical)?;
    objective.check_steps(dataset.num_steps())?;
    let found =
        categorical_candidate(dataset, cluster, index, objective, admission_floor(min_size, mode))?;
    Ok(finish(found, min_size))
}

fn feature_candidate(
    dataset: &Dataset,
    cluster: &[usize],
    feature: usize,
    objective: &ObjectiveSpec,
    floor: usize,
) -> Result<Option<SplitCandidate>, SearchError> {
    match dataset.schema().feature(feature).kind {
        FeatureKind::Numeric => numeric_candidate(dataset, cluster, feature, objective, floor),
        FeatureKind::Categorical => categorical_candidate(dataset, cluster, feature, objective, floor),
    }
}

/// Best division of `cluster` over all features.
///
/// Per-feature searches may run in parallel; the reduction always walks
/// features in schema order so the winner does not depend on scheduling.
pub fn best_split(
    dataset: &Dataset,
    cluster: &[usize],
    objective: &ObjectiveSpec,
    min_size: usize,
    mode: SearchMode,
) -> Result<Option<SplitCandidate>, SearchError> {
    objective.check_steps(dataset.num_steps())?;
    if cluster.is_empty() {
        return Ok(None);
    }
    let floor = admission_floor(min_size, mode);
    let m = dataset.schema().len();

    #[cfg(feature = "parallel")]
    let per_feature: Vec<_> = {
        use rayon::prelude::*;
        (0..m)
            .into_par_iter()
            .map(|f| feature_candidate(dataset, cluster, f, objective, floor))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_feature: Vec<_> = (0..m)
        .map(|f| feature_candidate(dataset, cluster, f, objective, floor))
        .collect();

    let mut best: Option<SplitCandidate> = None;
    for result in per_feature {
        if let Some(c) = result? {
            if best.as_ref().is_none_or(|b| prefer(objective, &c, b)) {
                best = Some(c);
            }
        }
    }
    Ok(finish(best, min_size))
}

/// Splits `cluster` into (`C_a`, `C_b`) row lists by `rule`, keeping order.
pub fn partition(
    dataset: &Dataset,
    cluster: &[usize],
    rule: &SplitRule,
) -> Result<(Vec<usize>, Vec<usize>), SearchError> {
    let feature = dataset
        .schema()
        .index_of(rule.feature())
        .ok_or_else(|| SearchError::UnknownFeature(rule.feature().to_string()))?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for &r in cluster {
        match rule.goes_to_a(dataset.value(r, feature)) {
            Some(true) => a.push(r),
            Some(false) => b.push(r),
            None => {
                return Err(SearchError::BadValue {
                    row: r,
                    feature: rule.feature().to_string(),
                })
            }
        }
    }
    Ok((a, b))
}

pub(crate) fn parent_counts(dataset: &Dataset, cluster: &[usize]) -> CountSeries {
    counts_over_time(dataset, cluster).expect("cluster rows come from the dataset")
}
