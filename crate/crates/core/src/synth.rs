//! Synthetic datasets with planted trends, and brute-force reference search.
//!
//! Generators draw from ChaCha8 (`rand_chacha`) seeded through
//! `SeedableRng::seed_from_u64`. Uniform values on `[lo, hi)` are computed as
//! `lo + (hi - lo) * (u >> 11) * 2^-53` from the generator's next `u64`, so a
//! dataset is reproducible from its [`PlantSpec`] alone.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{seq::index, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::data::{counts_over_time, Dataset, FeatureDef, FeatureKind, FeatureValue, Row, Schema};
use crate::objective::ObjectiveSpec;
use crate::search::{prefer, CategoryKey, MissingSide, SearchMode, SplitCandidate, SplitRule};
use crate::tree::{grow, ClusterTree, FitConfig, FitError, SplitFinder};

/// Default largest cluster the oracle will enumerate.
pub const DEFAULT_ORACLE_BOUND: usize = 5000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantSpec {
    pub students: usize,
    pub times: usize,
    pub signal_feature: String,
    pub noise_features: usize,
    /// One-based boundary step (shift) or anomaly step `x`.
    pub at: usize,
    pub affected_fraction: f64,
    pub band_low: (f64, f64),
    pub band_high: (f64, f64),
    pub seed: u64,
}

impl PlantSpec {
    /// 40 students over 6 steps, 30 of them shifting at step 4.
    pub fn example(seed: u64) -> Self {
        PlantSpec {
            students: 40,
            times: 6,
            signal_feature: "signal".into(),
            noise_features: 3,
            at: 4,
            affected_fraction: 0.75,
            band_low: (0.0, 1.0),
            band_high: (2.0, 3.0),
            seed,
        }
    }

    pub fn affected_count(&self) -> usize {
        (self.affected_fraction * self.students as f64).round() as usize
    }

    fn check(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.students == 0 {
            return bad("students must be at least 1");
        }
        if self.times < 3 {
            return bad("times must be at least 3");
        }
        if self.at < 2 || self.at > self.times - 1 {
            return bad("planted step must lie in 2..=T-1");
        }
        if !(self.affected_fraction > 0.0 && self.affected_fraction <= 1.0) {
            return bad("affected_fraction must be in (0, 1]");
        }
        if self.affected_count() == 0 {
            return bad("affected_fraction selects no students");
        }
        let (l, h) = (self.band_low, self.band_high);
        if !(l.0 < l.1 && h.0 < h.1) || ![l.0, l.1, h.0, h.1].iter().all(|v| v.is_finite()) {
            return bad("bands must be finite with low < high");
        }
        if !(l.1 < h.0 || h.1 < l.0) {
            return bad("bands must be disjoint with a positive gap");
        }
        if self.signal_feature.is_empty() {
            return bad("signal feature name must be non-empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantKind {
    Shift,
    Anomaly,
}

/// What was planted, for checking recovery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub kind: PlantKind,
    pub signal_feature: String,
    pub at: usize,
    pub affected: usize,
    pub affected_students: Vec<String>,
    pub band_low: (f64, f64),
    pub band_high: (f64, f64),
}

impl GroundTruth {
    /// `key=value` lines, the sidecar format written next to a dataset.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.kind {
            PlantKind::Shift => "shift",
            PlantKind::Anomaly => "anomaly",
        };
        let _ = writeln!(s, "kind={kind}");
        let _ = writeln!(s, "signal_feature={}", self.signal_feature);
        let _ = writeln!(s, "boundary={}", self.at);
        let _ = writeln!(s, "affected={}", self.affected);
        let _ = writeln!(s, "band_low={},{}", self.band_low.0, self.band_low.1);
        let _ = writeln!(s, "band_high={},{}", self.band_high.0, self.band_high.1);
        let _ = writeln!(s, "affected_students={}", self.affected_students.join(","));
        s
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid plant spec: {0}")]
    InvalidSpec(String),
}

struct Uniform(ChaCha8Rng);

impl Uniform {
    fn draw(&mut self, (lo, hi): (f64, f64)) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        lo + (hi - lo) * u
    }
}

fn generate(spec: &PlantSpec, kind: PlantKind) -> Result<(Dataset, GroundTruth), SynthError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.affected_count();
    let mut affected = index::sample(&mut rng, spec.students, k).into_vec();
    affected.sort_unstable();
    let mut is_affected = vec![false; spec.students];
    for &i in &affected {
        is_affected[i] = true;
    }

    let mut features = vec![FeatureDef::new(spec.signal_feature.clone(), FeatureKind::Numeric, false)];
    for j in 1..=spec.noise_features {
        let mut name = format!("noise_{j}");
        if name == spec.signal_feature {
            name.push('_');
        }
        features.push(FeatureDef::new(name, FeatureKind::Numeric, false));
    }
    let schema = Schema::new(features).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;

    let width = spec.students.to_string().len();
    let names: Vec<String> = (0..spec.students).map(|i| format!("s{:0width$}", i + 1)).collect();
    let mut draw = Uniform(rng);
    let mut rows = Vec::with_capacity(spec.students * spec.times);
    for (s, name) in names.iter().enumerate() {
        for step in 0..spec.times {
            let t = step + 1;
            let high = is_affected[s]
                && match kind {
                    PlantKind::Shift => t >= spec.at,
                    PlantKind::Anomaly => t == spec.at,
                };
            let band = if high { spec.band_high } else { spec.band_low };
            let mut values = Vec::with_capacity(1 + spec.noise_features);
            values.push(FeatureValue::Numeric(draw.draw(band)));
            for _ in 0..spec.noise_features {
                values.push(FeatureValue::Numeric(draw.draw((0.0, 1.0))));
            }
            rows.push(Row {
                student: name.clone(),
                step,
                values,
            });
        }
    }
    let dataset = Dataset::new(schema, (1..=spec.times as i64).collect(), rows)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let truth = GroundTruth {
        kind,
        signal_feature: spec.signal_feature.clone(),
        at: spec.at,
        affected: k,
        affected_students: affected.iter().map(|&i| names[i].clone()).collect(),
        band_low: spec.band_low,
        band_high: spec.band_high,
    };
    Ok((dataset, truth))
}

/// Affected students' signal sits in `band_high` from step `at` on; everything
/// else is drawn from `band_low`, and noise features from `[0, 1)`.
pub fn generate_planted_shift(spec: &PlantSpec) -> Result<(Dataset, GroundTruth), SynthError> {
    generate(spec, PlantKind::Shift)
}

/// Affected students' signal sits in `band_high` at step `at` only.
pub fn generate_planted_anomaly(spec: &PlantSpec) -> Result<(Dataset, GroundTruth), SynthError> {
    generate(spec, PlantKind::Anomaly)
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("cluster of {size} rows exceeds the oracle bound of {bound}")]
    TooLarge { size: usize, bound: usize },
    #[error(transparent)]
    Objective(#[from] crate::objective::ObjectiveError),
    #[error("row {row}: value of '{feature}' does not match its schema kind")]
    BadValue { row: usize, feature: String },
}

/// Exhaustive reference for [`crate::search::best_split`]: every distinct
/// threshold under every missing pinning, and every category, each divided
/// and counted from scratch.
pub fn oracle_best_split(
    dataset: &Dataset,
    cluster: &[usize],
    objective: &ObjectiveSpec,
    min_size: usize,
    mode: SearchMode,
    bound: usize,
) -> Result<Option<SplitCandidate>, OracleError> {
    if cluster.len() > bound {
        return Err(OracleError::TooLarge {
            size: cluster.len(),
            bound,
        });
    }
    objective.check_steps(dataset.num_steps())?;
    let need = match mode {
        SearchMode::Constrained => min_size.max(1),
        SearchMode::Reject => 1,
    };

    let mut best: Option<SplitCandidate> = None;
    for (f, def) in dataset.schema().features().iter().enumerate() {
        let rules = candidate_rules(dataset, cluster, f);
        for rule in rules {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for &r in cluster {
                match rule.goes_to_a(dataset.value(r, f)) {
                    Some(true) => a.push(r),
                    Some(false) => b.push(r),
                    None => {
                        return Err(OracleError::BadValue {
                            row: r,
                            feature: def.name.clone(),
                        })
                    }
                }
            }
            if a.len() < need || b.len() < need {
                continue;
            }
            let counts_a = counts_over_time(dataset, &a).expect("rows from dataset");
            let counts_b = counts_over_time(dataset, &b).expect("rows from dataset");
            let score = objective.score_counts(counts_a.as_slice(), counts_b.as_slice())?;
            let cand = SplitCandidate {
                rule,
                feature_index: f,
                score,
                size_a: a.len(),
                size_b: b.len(),
                counts_a,
                counts_b,
            };
            if best.as_ref().is_none_or(|b| prefer(objective, &cand, b)) {
                best = Some(cand);
            }
        }
    }
    Ok(best.filter(|c| c.is_feasible(min_size)))
}

fn candidate_rules(dataset: &Dataset, cluster: &[usize], feature: usize) -> Vec<SplitRule> {
    let name = dataset.schema().feature(feature).name.clone();
    match dataset.schema().feature(feature).kind {
        FeatureKind::Numeric => {
            let mut values: Vec<f64> = cluster
                .iter()
                .filter_map(|&r| dataset.value(r, feature).as_numeric())
                .map(|v| v + 0.0)
                .collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let has_missing = cluster.iter().any(|&r| dataset.value(r, feature).is_missing());
            let sides: &[MissingSide] = if has_missing {
                &[MissingSide::A, MissingSide::B]
            } else {
                &[MissingSide::B]
            };
            sides
                .iter()
                .flat_map(|&side| {
                    values.iter().map(move |&threshold| (threshold, side))
                })
                .map(|(threshold, missing_side)| SplitRule::NumericLe {
                    feature: name.clone(),
                    threshold,
                    missing_side,
                })
                .collect()
        }
        FeatureKind::Categorical => cluster
            .iter()
            .filter_map(|&r| CategoryKey::of(dataset.value(r, feature)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|category| SplitRule::CategoryEq {
                feature: name.clone(),
                category,
            })
            .collect(),
    }
}

struct OracleFinder {
    bound: usize,
}

impl SplitFinder for OracleFinder {
    fn find(
        &self,
        dataset: &Dataset,
        cluster: &[usize],
        objective: &ObjectiveSpec,
        min_size: usize,
        mode: SearchMode,
    ) -> Result<Option<SplitCandidate>, FitError> {
        oracle_best_split(dataset, cluster, objective, min_size, mode, self.bound)
            .map_err(|e| FitError::Finder(e.to_string()))
    }
}

/// [`crate::tree::fit`] with every split chosen by [`oracle_best_split`].
pub fn oracle_fit(
    dataset: &Dataset,
    objective: &ObjectiveSpec,
    config: &FitConfig,
    bound: usize,
) -> Result<ClusterTree, FitError> {
    grow(dataset, objective, config, &OracleFinder { bound })
}
