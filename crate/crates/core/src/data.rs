//! Long-format temporal records: one row per student per time step.
//!
//! A [`Dataset`] is the unit being clustered. Clusters are sets of row
//! indices, not sets of students, so one student lands in one cluster per
//! time step.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single cell of the value grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue {
    Numeric(f64),
    Category(String),
    Missing,
}

impl FeatureValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }

    pub fn as_numeric(&self) -> Option<f64> {
        match self {
            FeatureValue::Numeric(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Numeric => f.write_str("numeric"),
            FeatureKind::Categorical => f.write_str("categorical"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
    pub allow_missing: bool,
}

impl FeatureDef {
    pub fn new(name: impl Into<String>, kind: FeatureKind, allow_missing: bool) -> Self {
        FeatureDef {
            name: name.into(),
            kind,
            allow_missing,
        }
    }
}

/// Ordered feature list. Order is significant: it drives tie-breaking
/// between equally scored splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    features: Vec<FeatureDef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("schema must contain at least one feature")]
    Empty,
    #[error("feature names must be non-empty")]
    EmptyName,
    #[error("duplicate feature name '{0}'")]
    DuplicateName(String),
}

impl Schema {
    pub fn new(features: Vec<FeatureDef>) -> Result<Self, SchemaError> {
        if features.is_empty() {
            return Err(SchemaError::Empty);
        }
        let mut seen = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(SchemaError::EmptyName);
            }
            if !seen.insert(f.name.as_str()) {
                return Err(SchemaError::DuplicateName(f.name.clone()));
            }
        }
        Ok(Schema { features })
    }

    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, index: usize) -> &FeatureDef {
        &self.features[index]
    }
}

/// One student's record at one time step.
///
/// `step` is the zero-based position of the row's time identifier in
/// [`Dataset::times`]; time step `i + 1` in one-based terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub student: String,
    pub step: usize,
    pub values: Vec<FeatureValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: Schema,
    times: Vec<i64>,
    rows: Vec<Row>,
}

#[derive(Debug, Error)]
#[error("invalid dataset: {0}")]
pub struct InvalidDataset(pub ValidationReport);

impl Dataset {
    /// Assembles a dataset without checking it. Use [`validate_dataset`] or
    /// [`Dataset::new`] to enforce the invariants.
    pub fn from_parts_unchecked(schema: Schema, times: Vec<i64>, rows: Vec<Row>) -> Self {
        Dataset {
            schema,
            times,
            rows,
        }
    }

    pub fn new(schema: Schema, times: Vec<i64>, rows: Vec<Row>) -> Result<Self, InvalidDataset> {
        let d = Dataset::from_parts_unchecked(schema, times, rows);
        let report = validate_dataset(&d);
        if report.is_empty() {
            Ok(d)
        } else {
            Err(InvalidDataset(report))
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_steps(&self) -> usize {
        self.times.len()
    }

    pub fn num_students(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.student.as_str())
            .collect::<HashSet<_>>()
            .len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn value(&self, row: usize, feature: usize) -> &FeatureValue {
        &self.rows[row].values[feature]
    }

    pub fn all_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).collect()
    }

    /// Same data with rows reordered; `order[i]` is the source row of row `i`.
    pub fn permuted(&self, order: &[usize]) -> Dataset {
        let rows = order.iter().map(|&i| self.rows[i].clone()).collect();
        Dataset::from_parts_unchecked(self.schema.clone(), self.times.clone(), rows)
    }
}

/// Per-time-step row counts of a subset, `counts[i]` for step `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CountSeries(pub Vec<u64>);

impl CountSeries {
    pub fn zeros(steps: usize) -> Self {
        CountSeries(vec![0; steps])
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Elementwise `self - other`; panics if any entry would go negative.
    pub fn minus(&self, other: &CountSeries) -> CountSeries {
        assert_eq!(self.len(), other.len(), "count series length mismatch");
        CountSeries(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.checked_sub(*b).expect("subtracted series exceeds parent"))
                .collect(),
        )
    }

    pub fn plus(&self, other: &CountSeries) -> CountSeries {
        assert_eq!(self.len(), other.len(), "count series length mismatch");
        CountSeries(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CountError {
    #[error("row index {index} out of range for dataset with {len} rows")]
    RowOutOfRange { index: usize, len: usize },
}

pub fn counts_over_time(dataset: &Dataset, subset: &[usize]) -> Result<CountSeries, CountError> {
    let mut counts = CountSeries::zeros(dataset.num_steps());
    let len = dataset.len();
    for &i in subset {
        let row = dataset
            .rows
            .get(i)
            .ok_or(CountError::RowOutOfRange { index: i, len })?;
        counts.0[row.step] += 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NoTimes,
    NoRows,
    TimesNotSortedUnique,
    UnknownTime { row: usize, step: usize },
    DuplicatePair { student: String, time: i64, first_row: usize, row: usize },
    WrongArity { row: usize, expected: usize, found: usize },
    KindMismatch { row: usize, feature: String, expected: FeatureKind },
    DisallowedMissing { row: usize, feature: String },
    NonFinite { row: usize, feature: String },
    EmptyCategory { row: usize, feature: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoTimes => f.write_str("dataset has no time steps"),
            Violation::NoRows => f.write_str("dataset has no rows"),
            Violation::TimesNotSortedUnique => {
                f.write_str("time identifiers are not sorted ascending and distinct")
            }
            Violation::UnknownTime { row, step } => {
                write!(f, "row {row}: time step index {step} is out of range")
            }
            Violation::DuplicatePair {
                student,
                time,
                first_row,
                row,
            } => write!(
                f,
                "row {row}: duplicate (student '{student}', time {time}), first seen at row {first_row}"
            ),
            Violation::WrongArity {
                row,
                expected,
                found,
            } => write!(f, "row {row}: expected {expected} values, found {found}"),
            Violation::KindMismatch {
                row,
                feature,
                expected,
            } => write!(f, "row {row}: feature '{feature}' expects a {expected} value"),
            Violation::DisallowedMissing { row, feature } => {
                write!(f, "row {row}: feature '{feature}' does not allow missing values")
            }
            Violation::NonFinite { row, feature } => {
                write!(f, "row {row}: feature '{feature}' holds a non-finite number")
            }
            Violation::EmptyCategory { row, feature } => {
                write!(f, "row {row}: feature '{feature}' holds an empty category")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let mut violations = Vec::new();
    if dataset.times.is_empty() {
        violations.push(Violation::NoTimes);
    }
    if dataset.rows.is_empty() {
        violations.push(Violation::NoRows);
    }
    if dataset.times.windows(2).any(|w| w[0] >= w[1]) {
        violations.push(Violation::TimesNotSortedUnique);
    }

    let features = dataset.schema.features();
    let mut seen: HashMap<(&str, usize), usize> = HashMap::new();
    for (i, row) in dataset.rows.iter().enumerate() {
        if row.step >= dataset.times.len() {
            violations.push(Violation::UnknownTime { row: i, step: row.step });
        } else if let Some(&first) = seen.get(&(row.student.as_str(), row.step)) {
            violations.push(Violation::DuplicatePair {
                student: row.student.clone(),
                time: dataset.times[row.step],
                first_row: first,
                row: i,
            });
        } else {
            seen.insert((row.student.as_str(), row.step), i);
        }

        if row.values.len() != features.len() {
            violations.push(Violation::WrongArity {
                row: i,
                expected: features.len(),
                found: row.values.len(),
            });
            continue;
        }
        for (def, value) in features.iter().zip(&row.values) {
            let feature = || def.name.clone();
            match (def.kind, value) {
                (_, FeatureValue::Missing) if !def.allow_missing => {
                    violations.push(Violation::DisallowedMissing { row: i, feature: feature() })
                }
                (_, FeatureValue::Missing) => {}
                (FeatureKind::Numeric, FeatureValue::Numeric(v)) if !v.is_finite() => {
                    violations.push(Violation::NonFinite { row: i, feature: feature() })
                }
                (FeatureKind::Categorical, FeatureValue::Category(c)) if c.is_empty() => {
                    violations.push(Violation::EmptyCategory { row: i, feature: feature() })
                }
                (FeatureKind::Numeric, FeatureValue::Numeric(_))
                | (FeatureKind::Categorical, FeatureValue::Category(_)) => {}
                (expected, _) => violations.push(Violation::KindMismatch {
                    row: i,
                    feature: feature(),
                    expected,
                }),
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_schema() -> Schema {
        Schema::new(vec![FeatureDef::new("f", FeatureKind::Numeric, false)]).unwrap()
    }

    fn row(student: &str, step: usize, v: FeatureValue) -> Row {
        Row {
            student: student.into(),
            step,
            values: vec![v],
        }
    }

    fn grid(students: &[&str], steps: usize) -> Dataset {
        let mut rows = Vec::new();
        for s in students {
            for t in 0..steps {
                rows.push(row(s, t, FeatureValue::Numeric(t as f64)));
            }
        }
        Dataset::from_parts_unchecked(numeric_schema(), (1..=steps as i64).collect(), rows)
    }

    #[test]
    fn well_formed_dataset_has_empty_report() {
        let d = grid(&["a", "b"], 2);
        assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn duplicate_pair_reported_once() {
        let mut d = grid(&["a", "b"], 2);
        d.rows.push(row("a", 0, FeatureValue::Numeric(9.0)));
        let report = validate_dataset(&d);
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(
            &report.violations[0],
            Violation::DuplicatePair { student, time: 1, first_row: 0, row: 4 } if student == "a"
        ));
    }

    #[test]
    fn category_in_numeric_column_is_kind_mismatch() {
        let mut d = grid(&["a", "b"], 2);
        d.rows[3].values[0] = FeatureValue::Category("abc".into());
        let report = validate_dataset(&d);
        assert_eq!(
            report.violations,
            vec![Violation::KindMismatch {
                row: 3,
                feature: "f".into(),
                expected: FeatureKind::Numeric
            }]
        );
    }

    #[test]
    fn missing_nonfinite_and_unknown_time() {
        let mut d = grid(&["a"], 2);
        d.rows[0].values[0] = FeatureValue::Missing;
        d.rows[1].values[0] = FeatureValue::Numeric(f64::NAN);
        d.rows.push(row("b", 5, FeatureValue::Numeric(1.0)));
        let report = validate_dataset(&d);
        assert_eq!(report.violations.len(), 3);
        assert!(matches!(report.violations[0], Violation::DisallowedMissing { row: 0, .. }));
        assert!(matches!(report.violations[1], Violation::NonFinite { row: 1, .. }));
        assert!(matches!(report.violations[2], Violation::UnknownTime { row: 2, step: 5 }));
    }

    #[test]
    fn unsorted_times_and_empty_dataset() {
        let d = Dataset::from_parts_unchecked(numeric_schema(), vec![2, 1], vec![]);
        let report = validate_dataset(&d);
        assert!(report.violations.contains(&Violation::NoRows));
        assert!(report.violations.contains(&Violation::TimesNotSortedUnique));
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert_eq!(Schema::new(vec![]), Err(SchemaError::Empty));
        let dup = vec![
            FeatureDef::new("x", FeatureKind::Numeric, false),
            FeatureDef::new("x", FeatureKind::Categorical, false),
        ];
        assert_eq!(Schema::new(dup), Err(SchemaError::DuplicateName("x".into())));
    }

    #[test]
    fn counts_complete_grid() {
        let d = grid(&["a", "b", "c"], 2);
        assert_eq!(counts_over_time(&d, &d.all_rows()).unwrap().0, vec![3, 3]);
    }

    #[test]
    fn counts_empty_subset() {
        let d = grid(&["a", "b", "c"], 4);
        assert_eq!(counts_over_time(&d, &[]).unwrap().0, vec![0, 0, 0, 0]);
    }

    #[test]
    fn counts_partial_subset() {
        let d = grid(&["A", "B", "C", "D"], 3);
        // rows are student-major: A at steps 0..3 are rows 0..3, B rows 3..6
        let subset = [0, 1, 3, 4];
        assert_eq!(counts_over_time(&d, &subset).unwrap().0, vec![2, 2, 0]);
    }

    #[test]
    fn counts_out_of_range() {
        let d = grid(&["a"], 2);
        assert_eq!(
            counts_over_time(&d, &[0, 7]),
            Err(CountError::RowOutOfRange { index: 7, len: 2 })
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_additivity(
                steps in 1usize..6,
                students in 1usize..8,
                labels in proptest::collection::vec(0usize..4, 48),
            ) {
                let names: Vec<String> = (0..students).map(|i| format!("s{i}")).collect();
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                let d = grid(&refs, steps);
                let whole = counts_over_time(&d, &d.all_rows()).unwrap();
                let mut sum = CountSeries::zeros(steps);
                for part in 0..4 {
                    let subset: Vec<usize> = (0..d.len()).filter(|&i| labels[i] == part).collect();
                    sum = sum.plus(&counts_over_time(&d, &subset).unwrap());
                }
                prop_assert_eq!(sum, whole);
            }

            #[test]
            fn permutation_invariant(mut subset in proptest::collection::vec(0usize..12, 0..20)) {
                let d = grid(&["a", "b", "c", "d"], 3);
                let forward = counts_over_time(&d, &subset).unwrap();
                subset.reverse();
                prop_assert_eq!(forward, counts_over_time(&d, &subset).unwrap());
            }
        }
    }
}
