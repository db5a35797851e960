//! Effectiveness metrics over replayed event logs.

pub mod annotation;
pub mod bootstrap;
pub mod frame;
pub mod metrics;
pub mod regression;
pub mod report;
pub mod significance;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use annotation::{annotation_summary, AnnotationFlag, AnnotationRecord, AnnotationSummary};
pub use bootstrap::{bootstrap_mean, bootstrap_proportion, BootstrapConfig, Estimate, DEFAULT_RESAMPLES};
pub use frame::{AnalysisFrame, Impression, JudgmentObs, RatingObs};
pub use metrics::{
    accuracy, accuracy_by_trial, alignment_regression, helpfulness, helpfulness_by_alignment,
    interaction_rates, summarize_ratings, AccuracyOptions, AlignmentAccuracy, AlignmentHelpfulness,
    HelpfulnessSummary, InteractionRates, PreSelection, TrialBreakdown, UserPoint,
};
pub use regression::{format_p, group_means, ols, GroupMeans, RegressionResult};
pub use report::{parse_subset, subset_report, ArmReport, BalanceCheck, ExperimentReport};
pub use significance::{mann_whitney, significance, welch_t_test, MannWhitney, Significance, TTest};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum StatsError {
    #[error("empty selection: {0}")]
    EmptySelection(String),
    #[error("every value in both samples is identical")]
    DegenerateSample,
    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// How an `uncertain` judgment counts toward accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertainMode {
    #[default]
    Incorrect,
    Exclude,
}
