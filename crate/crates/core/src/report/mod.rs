//! Outputs: rule tables, distribution tables and plots, dataset text, and the
//! correlation check used to relate a cluster's share to an external series.

mod correlate;
mod dataset;
mod distribution;
mod plot;
mod rules;

pub use correlate::{correlate, pearson, Correlation, CorrelationError};
pub use dataset::{serialize_dataset, serialize_dataset_with};
pub use distribution::{export_distribution, parse_distribution, DistributionError, DistributionTable};
pub use plot::{emit_plot, render_svg, PlotOptions};
pub use rules::{leaf_rules, render_rules, render_rules_csv, Condition, LeafRule};
