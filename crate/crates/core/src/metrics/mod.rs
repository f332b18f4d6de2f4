//! Evaluation primitives, streaming aggregates and analysis helpers.
//!
//! Undefined values (single-class test sets, zero variance) are `None`,
//! never NaN.

mod analysis;
mod auc;
mod diagnostics;
mod series;

pub use analysis::{ols_slope, optimal_step, perf_drop, relative_improvement, spearman};
pub use auc::{auc, average_ranks, evaluate, logloss, EvalResult, PROB_CLIP};
pub use diagnostics::{feature_presence, positive_ratio_per_hour, HourRatio, PresenceMatrix};
pub use series::{assemble_series, Aggregate, MetricSeries, SeriesInput, TimestampMetrics, Weighting};
