//! Divisive hierarchical clustering of temporal behaviour records.
//!
//! Rows are (student, time step, features). Starting from one cluster holding
//! every row, each cluster is divided by the single-feature rule that best
//! separates the two sides' counts over time, as measured by a pluggable
//! objective. The result is a decision-rule hierarchy whose leaf shares over
//! time expose trends in behaviour.
//!
//! ```
//! use detect_core::{fit, FitConfig, ObjectiveSpec, synth::{generate_planted_shift, PlantSpec}};
//!
//! let (data, truth) = generate_planted_shift(&PlantSpec::example(7)).unwrap();
//! let tree = fit(&data, &ObjectiveSpec::StartEndShift, &FitConfig::new(24)).unwrap();
//! let root = tree.root.split.as_ref().unwrap();
//! assert_eq!(root.rule.feature(), truth.signal_feature);
//! assert_eq!(root.score.0, 30.0);
//! ```

pub mod data;
pub mod ingest;
pub mod objective;
pub mod report;
pub mod search;
pub mod synth;
pub mod tree;

pub use data::{counts_over_time, validate_dataset, CountSeries, Dataset, FeatureDef, FeatureKind, FeatureValue, Row, Schema};
pub use ingest::{parse_dataset, parse_dataset_str, IngestConfig, IngestError};
pub use objective::{eval_f1, eval_f2, eval_objective, CustomObjective, ObjectiveError, ObjectiveSpec, Score};
pub use search::{best_split, MissingSide, SearchMode, SplitCandidate, SplitRule};
pub use tree::{assign, fit, leaf_distributions, ClusterTree, FitConfig, FitError};

/// Runs `f` on a thread pool of `threads` workers (0 = one per core).
/// Fit results do not depend on the pool size.
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}
