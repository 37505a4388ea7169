//! Time-aware split objectives.
//!
//! An objective scores a candidate division of a cluster into `C_a` (the
//! rule-satisfied side) and `C_b` from the two sides' per-time row counts.
//! Higher is better. No smoothness is assumed: the search only ever compares
//! scores.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::CountSeries;

/// Non-negative, finite split quality.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(pub f64);

impl Score {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObjectiveError {
    #[error("objective undefined: f1 requires at least 3 time steps, dataset has {steps}")]
    TooFewSteps { steps: usize },
    #[error("objective undefined: f2 requires 2 <= x <= T-1 (T = {steps}), got x = {x}")]
    AnomalyOutOfRange { x: usize, steps: usize },
    #[error("count series length mismatch: C_a has {a} steps, C_b has {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("custom objective '{name}' returned a non-finite score")]
    NonFinite { name: String },
}

type Evaluator = dyn Fn(&[u64], &[u64]) -> f64 + Send + Sync;

/// A caller-supplied objective. The evaluator must be pure and deterministic.
#[derive(Clone)]
pub struct CustomObjective {
    name: String,
    min_steps: usize,
    evaluator: Arc<Evaluator>,
}

impl CustomObjective {
    pub fn new<F>(name: impl Into<String>, evaluator: F) -> Self
    where
        F: Fn(&[u64], &[u64]) -> f64 + Send + Sync + 'static,
    {
        CustomObjective {
            name: name.into(),
            min_steps: 1,
            evaluator: Arc::new(evaluator),
        }
    }

    /// Smallest number of time steps the evaluator is defined for.
    pub fn with_min_steps(mut self, min_steps: usize) -> Self {
        self.min_steps = min_steps;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomObjective")
            .field("name", &self.name)
            .field("min_steps", &self.min_steps)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum ObjectiveSpec {
    /// f1: start-versus-end shift of `C_a`.
    StartEndShift,
    /// f2: deviation of `C_a` at one-based time step `x` from its neighbours.
    AnomalyAt { x: usize },
    Custom(CustomObjective),
}

impl ObjectiveSpec {
    /// Checks that the objective is defined for a dataset with `steps` time steps.
    pub fn check_steps(&self, steps: usize) -> Result<(), ObjectiveError> {
        match self {
            ObjectiveSpec::StartEndShift if steps < 3 => Err(ObjectiveError::TooFewSteps { steps }),
            ObjectiveSpec::AnomalyAt { x } if *x < 2 || *x + 1 > steps => {
                Err(ObjectiveError::AnomalyOutOfRange { x: *x, steps })
            }
            ObjectiveSpec::Custom(c) if steps < c.min_steps => {
                Err(ObjectiveError::TooFewSteps { steps })
            }
            _ => Ok(()),
        }
    }

    /// Whether scores are exact multiples of 0.5 and may be compared with `==`.
    pub fn is_exact(&self) -> bool {
        !matches!(self, ObjectiveSpec::Custom(_))
    }

    pub fn describe(&self) -> String {
        match self {
            ObjectiveSpec::StartEndShift => "f1".to_string(),
            ObjectiveSpec::AnomalyAt { x } => format!("f2(x={x})"),
            ObjectiveSpec::Custom(c) => format!("custom({})", c.name),
        }
    }

    /// Scores raw count slices. Callers in the hot path check the step count
    /// once with [`ObjectiveSpec::check_steps`] and then call this directly.
    pub fn score_counts(&self, counts_a: &[u64], counts_b: &[u64]) -> Result<Score, ObjectiveError> {
        if counts_a.len() != counts_b.len() {
            return Err(ObjectiveError::LengthMismatch {
                a: counts_a.len(),
                b: counts_b.len(),
            });
        }
        self.check_steps(counts_a.len())?;
        match self {
            ObjectiveSpec::StartEndShift => Ok(start_end_shift(counts_a)),
            ObjectiveSpec::AnomalyAt { x } => Ok(anomaly_at(counts_a, *x)),
            ObjectiveSpec::Custom(c) => {
                let v = (c.evaluator)(counts_a, counts_b);
                if v.is_finite() {
                    Ok(Score(v))
                } else {
                    Err(ObjectiveError::NonFinite {
                        name: c.name.clone(),
                    })
                }
            }
        }
    }
}

pub fn eval_objective(
    spec: &ObjectiveSpec,
    counts_a: &CountSeries,
    counts_b: &CountSeries,
) -> Result<Score, ObjectiveError> {
    spec.score_counts(counts_a.as_slice(), counts_b.as_slice())
}

/// `|(n_a(t_1) + n_a(t_2))/2 - (n_a(t_T) + n_a(t_{T-1}))/2|`
pub fn eval_f1(counts_a: &CountSeries) -> Result<Score, ObjectiveError> {
    let steps = counts_a.len();
    if steps < 3 {
        return Err(ObjectiveError::TooFewSteps { steps });
    }
    Ok(start_end_shift(counts_a.as_slice()))
}

/// `(|n_a(t_x) - n_a(t_{x+1})| + |n_a(t_x) - n_a(t_{x-1})|)/2`, `x` one-based.
pub fn eval_f2(counts_a: &CountSeries, x: usize) -> Result<Score, ObjectiveError> {
    ObjectiveSpec::AnomalyAt { x }.check_steps(counts_a.len())?;
    Ok(anomaly_at(counts_a.as_slice(), x))
}

fn start_end_shift(n: &[u64]) -> Score {
    let t = n.len();
    let start = (n[0] as f64 + n[1] as f64) / 2.0;
    let end = (n[t - 1] as f64 + n[t - 2] as f64) / 2.0;
    Score((start - end).abs())
}

fn anomaly_at(n: &[u64], x: usize) -> Score {
    let at = n[x - 1];
    let next = at.abs_diff(n[x]);
    let prev = at.abs_diff(n[x - 2]);
    Score((next + prev) as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cs(v: &[u64]) -> CountSeries {
        CountSeries(v.to_vec())
    }

    #[test]
    fn f1_unit_values() {
        assert_eq!(eval_f1(&cs(&[15, 15, 35, 35])).unwrap(), Score(20.0));
        assert_eq!(eval_f1(&cs(&[0, 10, 20])).unwrap(), Score(10.0));
        assert_eq!(eval_f1(&cs(&[7, 7, 7, 7])).unwrap(), Score(0.0));
    }

    #[test]
    fn f2_unit_values() {
        assert_eq!(eval_f2(&cs(&[5, 5, 20, 5, 5]), 3).unwrap(), Score(15.0));
        assert_eq!(eval_f2(&cs(&[3, 9, 6]), 2).unwrap(), Score(4.5));
        assert_eq!(eval_f2(&cs(&[4, 4, 4, 4]), 3).unwrap(), Score(0.0));
    }

    #[test]
    fn dispatch_matches_direct_evaluation() {
        let s = eval_objective(&ObjectiveSpec::StartEndShift, &cs(&[2, 2, 0]), &cs(&[9, 1, 4]));
        assert_eq!(s.unwrap(), Score(1.0));
        let s = eval_objective(
            &ObjectiveSpec::AnomalyAt { x: 3 },
            &cs(&[5, 5, 20, 5, 5]),
            &cs(&[0; 5]),
        );
        assert_eq!(s.unwrap(), Score(15.0));
        let s = eval_objective(&ObjectiveSpec::StartEndShift, &cs(&[7; 4]), &cs(&[1; 4]));
        assert_eq!(s.unwrap(), Score(0.0));
    }

    #[test]
    fn undefined_objectives_are_errors() {
        assert_eq!(
            eval_f1(&cs(&[1, 2])),
            Err(ObjectiveError::TooFewSteps { steps: 2 })
        );
        assert!(eval_f2(&cs(&[1, 2, 3]), 1).is_err());
        assert!(eval_f2(&cs(&[1, 2, 3]), 3).is_err());
        assert!(eval_f2(&cs(&[1, 2, 3]), 0).is_err());
        assert_eq!(
            eval_objective(&ObjectiveSpec::StartEndShift, &cs(&[1, 2, 3]), &cs(&[1, 2])),
            Err(ObjectiveError::LengthMismatch { a: 3, b: 2 })
        );
        let msg = ObjectiveError::TooFewSteps { steps: 2 }.to_string();
        assert!(msg.starts_with("objective undefined: f1 requires at least 3 time steps"));
    }

    #[test]
    fn custom_objective_sees_both_sides() {
        let balance = CustomObjective::new("balance", |a, b| {
            -(a.iter().sum::<u64>() as f64 - b.iter().sum::<u64>() as f64).abs()
        });
        let spec = ObjectiveSpec::Custom(balance);
        assert_eq!(
            eval_objective(&spec, &cs(&[1, 2]), &cs(&[2, 2])).unwrap(),
            Score(-1.0)
        );
        let nan = ObjectiveSpec::Custom(CustomObjective::new("nan", |_, _| f64::NAN));
        assert!(matches!(
            eval_objective(&nan, &cs(&[1]), &cs(&[1])),
            Err(ObjectiveError::NonFinite { .. })
        ));
    }

    fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<u64>> {
        proptest::collection::vec(0u64..1000, len)
    }

    proptest! {
        #[test]
        fn nonnegative_and_half_integer(a in series(3..12), x in 0usize..12) {
            let f1 = eval_f1(&cs(&a)).unwrap().0;
            prop_assert!(f1 >= 0.0 && f1.is_finite());
            prop_assert_eq!((f1 * 2.0).fract(), 0.0);
            if let Ok(f2) = eval_f2(&cs(&a), x) {
                prop_assert!(f2.0 >= 0.0 && f2.0.is_finite());
                prop_assert_eq!((f2.0 * 2.0).fract(), 0.0);
            }
        }

        #[test]
        fn independent_of_counts_b(a in series(3..10), seed in any::<u64>()) {
            let b1: Vec<u64> = a.iter().map(|v| v ^ (seed % 97)).collect();
            let b2 = vec![0; a.len()];
            let x = 2 + (seed as usize) % (a.len() - 2);
            for spec in [ObjectiveSpec::StartEndShift, ObjectiveSpec::AnomalyAt { x }] {
                prop_assert_eq!(
                    eval_objective(&spec, &cs(&a), &cs(&b1)).unwrap(),
                    eval_objective(&spec, &cs(&a), &cs(&b2)).unwrap()
                );
            }
        }

        #[test]
        fn swap_invariant_under_constant_totals(a in series(3..10), extra in 0u64..50, x in 2usize..9) {
            let total = a.iter().copied().max().unwrap() + extra;
            let b: Vec<u64> = a.iter().map(|v| total - v).collect();
            prop_assert_eq!(eval_f1(&cs(&a)).unwrap(), eval_f1(&cs(&b)).unwrap());
            if x < a.len() {
                prop_assert_eq!(eval_f2(&cs(&a), x).unwrap(), eval_f2(&cs(&b), x).unwrap());
            }
        }

        #[test]
        fn shift_invariant(a in series(3..10), k in 0u64..500, x in 2usize..9) {
            let shifted: Vec<u64> = a.iter().map(|v| v + k).collect();
            prop_assert_eq!(eval_f1(&cs(&a)).unwrap(), eval_f1(&cs(&shifted)).unwrap());
            if x < a.len() {
                prop_assert_eq!(eval_f2(&cs(&a), x).unwrap(), eval_f2(&cs(&shifted), x).unwrap());
            }
        }

        #[test]
        fn f2_triangle_bound(a in series(3..10), x in 2usize..9) {
            prop_assume!(x < a.len());
            let at = a[x - 1];
            let bound = at.abs_diff(a[x - 2]).max(at.abs_diff(a[x])) as f64;
            prop_assert!(eval_f2(&cs(&a), x).unwrap().0 <= bound);
        }

        #[test]
        fn constant_series_score_zero(v in 0u64..100, len in 3usize..10, x in 2usize..9) {
            let a = vec![v; len];
            prop_assert_eq!(eval_f1(&cs(&a)).unwrap(), Score(0.0));
            if x < len {
                prop_assert_eq!(eval_f2(&cs(&a), x).unwrap(), Score(0.0));
            }
        }
    }
}
