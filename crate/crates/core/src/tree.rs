//! Divisive recursion over clusters.
//!
//! All rows start in the root cluster `C`. Each cluster is split on its best
//! rule while both children keep at least `min_size` rows; `C_a` children
//! append `1` to the parent label and `C_b` children append `2`, so the first
//! split yields `C_1`/`C_2` and splitting `C_1` yields `C_11`/`C_12`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{validate_dataset, CountSeries, Dataset, FeatureKind, ValidationReport};
use crate::objective::{ObjectiveError, ObjectiveSpec, Score};
use crate::report::DistributionTable;
use crate::search::{self, parent_counts, SearchError, SearchMode, SplitCandidate, SplitRule};

pub const ROOT_LABEL: &str = "C";
pub const TREE_FORMAT: &str = "detect-tree/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Minimum rows in each child of a split.
    pub min_size: usize,
    pub mode: SearchMode,
    /// When set, split only if the best score is strictly above this value.
    pub min_score: Option<f64>,
    /// When set, clusters at this depth are not split (root depth is 0).
    pub max_depth: Option<usize>,
}

impl FitConfig {
    pub fn new(min_size: usize) -> Self {
        FitConfig {
            min_size,
            mode: SearchMode::Constrained,
            min_score: None,
            max_depth: None,
        }
    }

    pub fn with_mode(mut self, mode: SearchMode) -> Self {
        self.mode = mode;
        self
    }

    fn check(&self) -> Result<(), FitError> {
        if self.min_size == 0 {
            return Err(FitError::Config("min_size must be at least 1".into()));
        }
        if let Some(s) = self.min_score {
            if !s.is_finite() || s < 0.0 {
                return Err(FitError::Config("min_score must be finite and non-negative".into()));
            }
        }
        if self.max_depth == Some(0) {
            return Err(FitError::Config("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("{0}")]
    Finder(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub label: String,
    pub size: usize,
    pub counts: CountSeries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Box<NodeSplit>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub rule: SplitRule,
    pub score: Score,
    pub child_a: ClusterNode,
    pub child_b: ClusterNode,
}

impl ClusterNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// Depth-first visit, `child_a` before `child_b`.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a ClusterNode, usize)) {
        fn go<'a>(node: &'a ClusterNode, depth: usize, visit: &mut impl FnMut(&'a ClusterNode, usize)) {
            visit(node, depth);
            if let Some(s) = &node.split {
                go(&s.child_a, depth + 1, visit);
                go(&s.child_b, depth + 1, visit);
            }
        }
        go(self, 0, visit)
    }
}

/// A fitted hierarchy plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTree {
    pub format: String,
    pub objective: String,
    pub config: FitConfig,
    pub features: Vec<String>,
    pub times: Vec<i64>,
    pub root: ClusterNode,
}

impl ClusterTree {
    pub fn leaves(&self) -> Vec<&ClusterNode> {
        let mut out = Vec::new();
        self.root.walk(&mut |n, _| {
            if n.is_leaf() {
                out.push(n)
            }
        });
        out
    }

    pub fn nodes(&self) -> Vec<(&ClusterNode, usize)> {
        let mut out = Vec::new();
        self.root.walk(&mut |n, d| out.push((n, d)));
        out
    }

    pub fn depth(&self) -> usize {
        self.nodes().iter().map(|(_, d)| *d).max().unwrap_or(0)
    }

    /// Canonical serialization: pretty JSON with fixed key order and a
    /// trailing newline. Byte-identical for identical trees.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ClusterTree, serde_json::Error> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let tree = ClusterTree::deserialize(&mut de)?;
        de.end()?;
        Ok(tree)
    }
}

pub fn child_label(parent: &str, side_a: bool) -> String {
    let digit = if side_a { '1' } else { '2' };
    if parent == ROOT_LABEL {
        format!("{ROOT_LABEL}_{digit}")
    } else {
        format!("{parent}{digit}")
    }
}

/// Splitter used by the recursion: optimized search or the exhaustive oracle.
pub(crate) trait SplitFinder: Sync {
    fn find(
        &self,
        dataset: &Dataset,
        cluster: &[usize],
        objective: &ObjectiveSpec,
        min_size: usize,
        mode: SearchMode,
    ) -> Result<Option<SplitCandidate>, FitError>;
}

struct SweepFinder;

impl SplitFinder for SweepFinder {
    fn find(
        &self,
        dataset: &Dataset,
        cluster: &[usize],
        objective: &ObjectiveSpec,
        min_size: usize,
        mode: SearchMode,
    ) -> Result<Option<SplitCandidate>, FitError> {
        Ok(search::best_split(dataset, cluster, objective, min_size, mode)?)
    }
}

pub fn fit(dataset: &Dataset, objective: &ObjectiveSpec, config: &FitConfig) -> Result<ClusterTree, FitError> {
    grow(dataset, objective, config, &SweepFinder)
}

pub(crate) fn grow(
    dataset: &Dataset,
    objective: &ObjectiveSpec,
    config: &FitConfig,
    finder: &dyn SplitFinder,
) -> Result<ClusterTree, FitError> {
    config.check()?;
    if dataset.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    let report = validate_dataset(dataset);
    if !report.is_empty() {
        return Err(FitError::Invalid(report));
    }
    objective.check_steps(dataset.num_steps())?;

    let ctx = Grow {
        dataset,
        objective,
        config,
        finder,
    };
    let root = ctx.node(ROOT_LABEL.to_string(), dataset.all_rows(), 0)?;
    Ok(ClusterTree {
        format: TREE_FORMAT.to_string(),
        objective: objective.describe(),
        config: config.clone(),
        features: dataset.schema().features().iter().map(|f| f.name.clone()).collect(),
        times: dataset.times().to_vec(),
        root,
    })
}

struct Grow<'a> {
    dataset: &'a Dataset,
    objective: &'a ObjectiveSpec,
    config: &'a FitConfig,
    finder: &'a dyn SplitFinder,
}

impl Grow<'_> {
    fn node(&self, label: String, rows: Vec<usize>, depth: usize) -> Result<ClusterNode, FitError> {
        let counts = parent_counts(self.dataset, &rows);
        let mut node = ClusterNode {
            label,
            size: rows.len(),
            counts,
            split: None,
        };
        if self.config.max_depth.is_some_and(|m| depth >= m) {
            return Ok(node);
        }
        let Some(best) = self
            .finder
            .find(self.dataset, &rows, self.objective, self.config.min_size, self.config.mode)?
        else {
            return Ok(node);
        };
        if !best.is_feasible(self.config.min_size) {
            return Ok(node);
        }
        if self.config.min_score.is_some_and(|m| best.score.0 <= m) {
            return Ok(node);
        }

        let (rows_a, rows_b) = search::partition(self.dataset, &rows, &best.rule)?;
        debug_assert_eq!((rows_a.len(), rows_b.len()), (best.size_a, best.size_b));
        drop(rows);
        let label_a = child_label(&node.label, true);
        let label_b = child_label(&node.label, false);

        #[cfg(feature = "parallel")]
        let (a, b) = rayon::join(
            || self.node(label_a, rows_a, depth + 1),
            || self.node(label_b, rows_b, depth + 1),
        );
        #[cfg(not(feature = "parallel"))]
        let (a, b) = (
            self.node(label_a, rows_a, depth + 1),
            self.node(label_b, rows_b, depth + 1),
        );

        node.split = Some(Box::new(NodeSplit {
            rule: best.rule,
            score: best.score,
            child_a: a?,
            child_b: b?,
        }));
        Ok(node)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignError {
    #[error("tree references feature '{0}' which the dataset does not have")]
    MissingFeature(String),
    #[error("tree rule on '{feature}' is {rule_kind} but the dataset feature is {data_kind}")]
    KindMismatch {
        feature: String,
        rule_kind: FeatureKind,
        data_kind: FeatureKind,
    },
    #[error("row {row}: value of '{feature}' does not fit the rule")]
    BadValue { row: usize, feature: String },
}

/// Leaf label of every row, indexed by row.
pub fn assign<'t>(tree: &'t ClusterTree, dataset: &Dataset) -> Result<Vec<&'t str>, AssignError> {
    // schema position of each internal node's rule feature
    let mut feature_of: HashMap<*const ClusterNode, usize> = HashMap::new();
    let mut err = None;
    tree.root.walk(&mut |n, _| {
        if let Some(s) = &n.split {
            match resolve_rule(&s.rule, dataset) {
                Ok(i) => {
                    feature_of.insert(n, i);
                }
                Err(e) => {
                    err.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }

    let mut labels = Vec::with_capacity(dataset.len());
    for (r, row) in dataset.rows().iter().enumerate() {
        let mut node = &tree.root;
        while let Some(split) = &node.split {
            let value = &row.values[feature_of[&(node as *const ClusterNode)]];
            let to_a = split.rule.goes_to_a(value).ok_or_else(|| AssignError::BadValue {
                row: r,
                feature: split.rule.feature().to_string(),
            })?;
            node = if to_a { &split.child_a } else { &split.child_b };
        }
        labels.push(node.label.as_str());
    }
    Ok(labels)
}

fn resolve_rule(rule: &SplitRule, dataset: &Dataset) -> Result<usize, AssignError> {
    let name = rule.feature();
    let i = dataset
        .schema()
        .index_of(name)
        .ok_or_else(|| AssignError::MissingFeature(name.to_string()))?;
    let data_kind = dataset.schema().feature(i).kind;
    if data_kind != rule.kind() {
        return Err(AssignError::KindMismatch {
            feature: name.to_string(),
            rule_kind: rule.kind(),
            data_kind,
        });
    }
    Ok(i)
}

/// Rows per leaf per time step; leaves in depth-first order.
pub fn leaf_distributions(tree: &ClusterTree, dataset: &Dataset) -> Result<DistributionTable, AssignError> {
    let labels = assign(tree, dataset)?;
    let leaves: Vec<String> = tree.leaves().iter().map(|l| l.label.clone()).collect();
    let column: HashMap<&str, usize> =
        leaves.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut counts = vec![vec![0u64; leaves.len()]; dataset.num_steps()];
    for (row, label) in dataset.rows().iter().zip(labels) {
        counts[row.step][column[label]] += 1;
    }
    Ok(DistributionTable {
        times: dataset.times().to_vec(),
        leaves,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureDef, FeatureValue, Row, Schema};

    fn constant_dataset() -> Dataset {
        let schema = Schema::new(vec![
            FeatureDef::new("x", FeatureKind::Numeric, false),
            FeatureDef::new("k", FeatureKind::Categorical, false),
        ])
        .unwrap();
        let rows = (0..12)
            .map(|i| Row {
                student: format!("s{}", i / 3),
                step: i % 3,
                values: vec![FeatureValue::Numeric(2.0), FeatureValue::Category("a".into())],
            })
            .collect();
        Dataset::new(schema, vec![1, 2, 3], rows).unwrap()
    }

    /// s0..s3 low early then high; s4..s7 always high; second feature splits
    /// the early-low group by student parity.
    fn two_level() -> Dataset {
        let schema = Schema::new(vec![
            FeatureDef::new("g", FeatureKind::Numeric, false),
            FeatureDef::new("h", FeatureKind::Categorical, false),
        ])
        .unwrap();
        let mut rows = Vec::new();
        for s in 0..8 {
            for step in 0..4 {
                let g = if s < 4 && step < 2 { 1.0 } else { 9.0 };
                let h = if s % 2 == 0 && step == 0 { "x" } else { "y" };
                rows.push(Row {
                    student: format!("s{s}"),
                    step,
                    values: vec![FeatureValue::Numeric(g), FeatureValue::Category(h.into())],
                });
            }
        }
        Dataset::new(schema, vec![10, 20, 30, 40], rows).unwrap()
    }

    #[test]
    fn constant_data_gives_single_leaf() {
        let d = constant_dataset();
        let tree = fit(&d, &ObjectiveSpec::StartEndShift, &FitConfig::new(1)).unwrap();
        assert!(tree.root.is_leaf());
        assert_eq!(tree.root.label, "C");
        assert!(assign(&tree, &d).unwrap().iter().all(|l| *l == "C"));
        let dist = leaf_distributions(&tree, &d).unwrap();
        assert_eq!(dist.counts, vec![vec![4], vec![4], vec![4]]);
    }

    #[test]
    fn labels_follow_path_convention() {
        assert_eq!(child_label("C", true), "C_1");
        assert_eq!(child_label("C", false), "C_2");
        assert_eq!(child_label("C_1", true), "C_11");
        assert_eq!(child_label("C_1", false), "C_12");
    }

    #[test]
    fn two_level_tree_and_assignment() {
        let d = two_level();
        let tree = fit(&d, &ObjectiveSpec::StartEndShift, &FitConfig::new(2)).unwrap();
        let split = tree.root.split.as_ref().unwrap();
        assert_eq!(split.rule.feature(), "g");
        assert_eq!(split.score, Score(4.0));
        let labels: Vec<&str> = tree.leaves().iter().map(|l| l.label.as_str()).collect();
        assert_eq!(labels[0], "C_11");
        assert!(labels.iter().all(|l| l.starts_with("C_")));

        let assigned = assign(&tree, &d).unwrap();
        // replay the partition from the root and compare
        fn collect(node: &ClusterNode, d: &Dataset, rows: Vec<usize>, out: &mut Vec<String>) {
            match &node.split {
                None => rows.iter().for_each(|&r| out[r] = node.label.clone()),
                Some(s) => {
                    let (a, b) = search::partition(d, &rows, &s.rule).unwrap();
                    assert_eq!((a.len(), b.len()), (s.child_a.size, s.child_b.size));
                    collect(&s.child_a, d, a, out);
                    collect(&s.child_b, d, b, out);
                }
            }
        }
        let mut replay = vec![String::new(); d.len()];
        collect(&tree.root, &d, d.all_rows(), &mut replay);
        assert_eq!(assigned, replay.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn threshold_equality_goes_to_side_a() {
        let d = two_level();
        let tree = fit(&d, &ObjectiveSpec::StartEndShift, &FitConfig::new(2)).unwrap();
        let labels = assign(&tree, &d).unwrap();
        // row 0 is s0 at step 0 with g = 1.0 = threshold
        assert!(labels[0].starts_with("C_1"));
    }

    #[test]
    fn size_gate_and_depth_limits() {
        let d = two_level();
        let big = fit(&d, &ObjectiveSpec::StartEndShift, &FitConfig::new(17)).unwrap();
        assert!(big.root.is_leaf());
        let mut cfg = FitConfig::new(1);
        cfg.max_depth = Some(1);
        let shallow = fit(&d, &ObjectiveSpec::StartEndShift, &cfg).unwrap();
        assert_eq!(shallow.depth(), 1);
        cfg.max_depth = None;
        cfg.min_score = Some(4.0);
        let picky = fit(&d, &ObjectiveSpec::StartEndShift, &cfg).unwrap();
        assert!(picky.root.is_leaf());
    }

    #[test]
    fn fit_errors() {
        let d = two_level();
        assert!(matches!(
            fit(&d, &ObjectiveSpec::AnomalyAt { x: 4 }, &FitConfig::new(1)),
            Err(FitError::Objective(_))
        ));
        assert!(matches!(
            fit(&d, &ObjectiveSpec::StartEndShift, &FitConfig::new(0)),
            Err(FitError::Config(_))
        ));
        let two_steps = Dataset::new(
            Schema::new(vec![FeatureDef::new("x", FeatureKind::Numeric, false)]).unwrap(),
            vec![1, 2],
            vec![Row { student: "a".into(), step: 0, values: vec![FeatureValue::Numeric(1.0)] }],
        )
        .unwrap();
        let err = fit(&two_steps, &ObjectiveSpec::StartEndShift, &FitConfig::new(1)).unwrap_err();
        assert_eq!(err.to_string(), "objective undefined: f1 requires at least 3 time steps, dataset has 2");
    }

    #[test]
    fn canonical_json_round_trips() {
        let d = two_level();
        let tree = fit(&d, &ObjectiveSpec::StartEndShift, &FitConfig::new(2)).unwrap();
        let text = tree.to_canonical_json();
        let back = ClusterTree::from_json(&text).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_canonical_json(), text);
        assert!(text.contains("\"kind\": \"numeric\""));
    }

    #[test]
    fn assign_rejects_schema_mismatch() {
        let d = two_level();
        let tree = fit(&d, &ObjectiveSpec::StartEndShift, &FitConfig::new(2)).unwrap();
        let other = constant_dataset();
        assert!(matches!(assign(&tree, &other), Err(AssignError::MissingFeature(_))));
    }

    #[test]
    fn empty_time_step_gives_zero_row() {
        let d = two_level();
        let rows: Vec<Row> = d.rows().iter().filter(|r| r.step != 2).cloned().collect();
        let gappy = Dataset::new(d.schema().clone(), d.times().to_vec(), rows).unwrap();
        let tree = fit(&gappy, &ObjectiveSpec::StartEndShift, &FitConfig::new(2)).unwrap();
        let dist = leaf_distributions(&tree, &gappy).unwrap();
        assert!(dist.counts[2].iter().all(|&c| c == 0));
        assert_eq!(dist.counts[0].iter().sum::<u64>(), 8);
    }
}
