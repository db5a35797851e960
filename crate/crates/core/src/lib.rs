//! Core library for running misinformation-intervention experiments:
//! claim datasets, intervention rendering, demographic inference, the
//! session engine, statistics, linguistic metrics and simulated users.

pub mod dataset;
pub mod domain;
pub mod engine;
pub mod fixtures;
pub mod interventions;
pub mod lingua;
pub mod personalization;
pub mod simusers;
pub mod stats;

pub use dataset::{ClaimFormat, Dataset, DatasetError, DatasetSummary};
pub use domain::*;
pub use personalization::{
    alignment_score, classify_alignment, infer_attributes, Alignment, AlignmentScore, Inference,
    PersonalizationError, PriorMode, ReferenceTable,
};
