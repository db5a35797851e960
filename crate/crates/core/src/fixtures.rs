//! Synthetic claims, reference tables and mock providers for tests, demos
//! and benchmarks. Nothing here talks to the network.

use std::sync::Arc;

use crate::dataset::Dataset;
use crate::domain::{AttributeSet, Claim, ClaimId, Topic, Veracity};
use crate::interventions::mock::FixedLengthClient;
use crate::interventions::{
    ExplanationGenerator, FrameTable, GenerationConfig, InterventionProvider, InterventionRenderer,
};
use crate::personalization::{QuestionFile, ReferenceTable, ReferenceTableFile};

/// `n_true` true claims followed by `n_false` false ones. Every third claim
/// is tagged medical, the rest political.
pub fn synthetic_dataset(n_true: usize, n_false: usize) -> Dataset {
    let claims = (0..n_true + n_false)
        .map(|i| {
            let topic = if i % 3 == 0 { Topic::Medical } else { Topic::Political };
            Claim::new(
                ClaimId::new(format!("c{i:04}")),
                format!("Synthetic headline number {i}"),
                "news.example",
                None,
                Veracity::from_bool(i < n_true),
                topic,
            )
            .expect("valid synthetic claim")
        })
        .collect();
    Dataset::from_claims(claims).expect("unique synthetic ids")
}

pub fn default_frames() -> FrameTable {
    FrameTable::default().with_fallback(
        "the story is more certain than the evidence allows",
        "share it before checking",
    )
}

/// Renders every arm; LLM arms answer with `words`-word mock completions.
pub fn mock_provider(words: usize) -> Arc<dyn InterventionProvider> {
    let generator = ExplanationGenerator::new(FixedLengthClient::new(words), GenerationConfig::default());
    Arc::new(InterventionRenderer::new(Arc::new(generator), Arc::new(default_frames())))
}

/// The six attribute sets used for pregenerated personalized explanations.
pub fn phase_two_groups() -> Vec<AttributeSet> {
    [
        "conservative, uneducated, male",
        "moderate, white, educated, female, 30-49",
        "moderate, white, educated, male, 30-49",
        "moderate, white, educated, male, 50-64",
        "moderate, white, uneducated, female, 30-49",
        "moderate, white, uneducated, female, 50-64",
    ]
    .iter()
    .map(|s| AttributeSet::parse(s).expect("valid attribute set"))
    .collect()
}

// favoured answer of each group on questions q0..q3
const FAVOURED: [[usize; 4]; 6] = [
    [0, 0, 0, 0],
    [1, 1, 0, 2],
    [2, 0, 1, 1],
    [0, 1, 2, 0],
    [1, 2, 2, 1],
    [2, 2, 0, 2],
];

/// A reference table over [`phase_two_groups`] with four three-answer
/// questions (`q0`..`q3`, answers `a`, `b`, `c`). Each group gives its
/// favoured answer with probability 0.6.
pub fn synthetic_reference_table() -> ReferenceTable {
    ReferenceTable::from_file(synthetic_reference_file()).expect("valid synthetic table")
}

/// The file form of [`synthetic_reference_table`].
pub fn synthetic_reference_file() -> ReferenceTableFile {
    let groups = phase_two_groups();
    let mut file = ReferenceTableFile {
        groups: groups.clone(),
        prior: None,
        questions: Default::default(),
    };
    for q in 0..4 {
        let mut question = QuestionFile {
            answers: vec!["a".into(), "b".into(), "c".into()],
            probabilities: Default::default(),
            counts: Default::default(),
        };
        for (g, attrs) in groups.iter().enumerate() {
            let favoured = FAVOURED[g][q];
            let row = ["a", "b", "c"]
                .iter()
                .enumerate()
                .map(|(i, a)| (a.to_string(), if i == favoured { 0.6 } else { 0.2 }))
                .collect();
            question.probabilities.insert(attrs.key(), row);
        }
        file.questions.insert(format!("q{q}"), question);
    }
    file
}
