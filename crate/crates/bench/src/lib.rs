//! Benchmark fixtures.

use feedlab_core::fixtures::synthetic_reference_table;
use feedlab_core::{ReferenceTable, SurveyAnswer};

/// A paragraph in the register of a generated explanation.
pub const EXPLANATION: &str = "This headline is false. No court or agency has reported any arrest, \
and the story traces back to a satirical site. Dr. Fauci continued public appearances the same week. \
Reputable outlets such as the AP checked the claim and found no evidence. Before sharing, look for \
the original source and whether other news organizations confirm it.";

pub fn reference() -> ReferenceTable {
    synthetic_reference_table()
}

/// One answer per question, always the first listed answer.
pub fn survey(table: &ReferenceTable) -> Vec<SurveyAnswer> {
    table
        .questions()
        .filter_map(|(q, answers)| answers.first().map(|a| SurveyAnswer::new(q, a.as_str())))
        .collect()
}
