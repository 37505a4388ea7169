#![allow(dead_code)]

use detect_core::data::{Dataset, FeatureDef, FeatureKind, FeatureValue, Row, Schema};
use detect_core::search::{partition, SplitRule};
use detect_core::tree::{assign, ClusterNode, ClusterTree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CATEGORIES: [&str; 5] = ["alpha", "beta", "gamma", "delta", "7"];

#[derive(Debug, Clone)]
pub struct RandomShape {
    pub max_students: usize,
    pub steps: (usize, usize),
    pub max_features: usize,
    pub max_missing: f64,
}

impl Default for RandomShape {
    fn default() -> Self {
        RandomShape {
            max_students: 40,
            steps: (3, 6),
            max_features: 5,
            max_missing: 0.2,
        }
    }
}

enum Column {
    Ints(i64),
    Continuous,
    Trend,
    Cats(usize),
}

/// Small mixed-kind dataset with ties, gaps, trends and missing values.
pub fn random_dataset(seed: u64, shape: &RandomShape) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let students = rng.random_range(2..=shape.max_students);
    let steps = rng.random_range(shape.steps.0..=shape.steps.1);
    let m = rng.random_range(1..=shape.max_features);
    let mut columns = Vec::new();
    let mut missing_rate = Vec::new();
    for _ in 0..m {
        columns.push(match rng.random_range(0..4) {
            0 => Column::Ints(rng.random_range(2..6)),
            1 => Column::Continuous,
            2 => Column::Trend,
            _ => Column::Cats(rng.random_range(1..=CATEGORIES.len())),
        });
        missing_rate.push(if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..shape.max_missing) });
    }

    let mut times: Vec<i64> = Vec::new();
    let mut t = rng.random_range(-5..5);
    for _ in 0..steps {
        times.push(t);
        t += rng.random_range(1..4);
    }

    let mut rows = Vec::new();
    let mut has_missing = vec![false; m];
    for s in 0..students {
        let drift: f64 = rng.random_range(-1.0..1.0);
        for step in 0..steps {
            // keep the first student complete so every step is present
            if s > 0 && rng.random_bool(0.1) {
                continue;
            }
            let mut values = Vec::with_capacity(m);
            for (j, col) in columns.iter().enumerate() {
                if rng.random_bool(missing_rate[j]) {
                    has_missing[j] = true;
                    values.push(FeatureValue::Missing);
                    continue;
                }
                values.push(match col {
                    Column::Ints(k) => FeatureValue::Numeric(rng.random_range(0..*k) as f64),
                    Column::Continuous => FeatureValue::Numeric(rng.random_range(-10.0..10.0)),
                    Column::Trend => {
                        let v = drift * step as f64 + rng.random_range(0.0..1.0);
                        FeatureValue::Numeric((v * 4.0).round() / 4.0)
                    }
                    Column::Cats(k) => {
                        FeatureValue::Category(CATEGORIES[rng.random_range(0..*k)].to_string())
                    }
                });
            }
            rows.push(Row {
                student: format!("st{s}"),
                step,
                values,
            });
        }
    }
    let defs = columns
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let kind = match c {
                Column::Cats(_) => FeatureKind::Categorical,
                _ => FeatureKind::Numeric,
            };
            FeatureDef::new(format!("f{j}"), kind, has_missing[j])
        })
        .collect();
    Dataset::new(Schema::new(defs).unwrap(), times, rows).unwrap()
}

/// Structural soundness of a fitted tree against its training data.
/// Returns a description of the first problem found.
pub fn check_structure(tree: &ClusterTree, data: &Dataset) -> Result<(), String> {
    let min_size = tree.config.min_size;
    let mut replay = vec![String::new(); data.len()];

    fn go(
        node: &ClusterNode,
        rows: Vec<usize>,
        data: &Dataset,
        is_root: bool,
        min_size: usize,
        replay: &mut Vec<String>,
    ) -> Result<(), String> {
        if node.size != rows.len() {
            return Err(format!("{}: size {} but {} rows", node.label, node.size, rows.len()));
        }
        if !is_root && node.size < min_size {
            return Err(format!("{}: {} rows below min_size {}", node.label, node.size, min_size));
        }
        let counts = detect_core::counts_over_time(data, &rows).unwrap();
        if counts != node.counts {
            return Err(format!("{}: stored counts differ", node.label));
        }
        match &node.split {
            None => {
                for r in rows {
                    replay[r] = node.label.clone();
                }
                Ok(())
            }
            Some(s) => {
                for child in [&s.child_a, &s.child_b] {
                    if !(child.label.starts_with(&node.label) && child.label.len() > node.label.len()) {
                        return Err(format!("{} is not a strict prefix of {}", node.label, child.label));
                    }
                }
                let (a, b) = partition(data, &rows, &s.rule).map_err(|e| e.to_string())?;
                if a.len() + b.len() != node.size || s.child_a.size + s.child_b.size != node.size {
                    return Err(format!("{}: children do not partition the parent", node.label));
                }
                go(&s.child_a, a, data, false, min_size, replay)?;
                go(&s.child_b, b, data, false, min_size, replay)
            }
        }
    }
    go(&tree.root, data.all_rows(), data, true, min_size, &mut replay)?;
    let assigned = assign(tree, data).map_err(|e| e.to_string())?;
    for (r, (got, want)) in assigned.iter().zip(&replay).enumerate() {
        if got != want {
            return Err(format!("row {r}: assign gave {got}, fit placed it in {want}"));
        }
    }
    Ok(())
}

/// Whether a numeric root rule separates the planted bands: every observed
/// low-band value on side A, every high-band value on side B.
pub fn separates_bands(rule: &SplitRule, data: &Dataset, low_max: f64) -> bool {
    let SplitRule::NumericLe { threshold, .. } = rule else {
        return false;
    };
    let f = data.schema().index_of(rule.feature()).unwrap();
    data.rows().iter().all(|r| {
        let v = r.values[f].as_numeric().unwrap();
        (v <= low_max) == (v <= *threshold)
    })
}
