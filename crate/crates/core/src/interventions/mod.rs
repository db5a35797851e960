//! The intervention texts shown in the pop-up, one renderer per arm.

pub mod generator;
pub mod mock;
pub mod pool;
pub mod templates;

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AttributeSet, Claim, ClaimId, InterventionArm, InterventionText};

pub use generator::{
    CompletionClient, ExplanationGenerator, GenerationConfig, ProviderError, ProviderErrorKind,
};
pub use pool::{GeneratedIntervention, PregeneratedPool};
pub use templates::{
    audience_clause, build_personalized_prompt, build_zero_shot_prompt, label_sentence,
    methodology_text, reaction_frame_text, FrameSlots, MethodologySource, PromptRequest, Stance,
    MAX_WORDS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterventionError {
    #[error("no reaction-frame slots for claim `{0}`")]
    MissingSlots(ClaimId),
    #[error("personalization needs at least one attribute")]
    EmptyAttributes,
    #[error("no pregenerated explanation for claim `{0}`")]
    NotPregenerated(ClaimId),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Something that can produce an LLM explanation for a claim, live or from
/// a pregenerated pool. `attrs = None` means zero-shot.
pub trait ExplanationSource: Send + Sync {
    fn explanation(
        &self,
        claim: &Claim,
        attrs: Option<&AttributeSet>,
    ) -> Result<InterventionText, InterventionError>;
}

/// Supplies writer-intent / reader-action slots for reaction frames.
pub trait FrameProvider: Send + Sync {
    fn slots(&self, claim: &Claim) -> Option<FrameSlots>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub claim_id: ClaimId,
    pub writer_intent: String,
    pub reader_action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<Stance>,
}

/// Lookup table of frame slots keyed by claim id, with an optional
/// catch-all entry.
#[derive(Debug, Clone, Default)]
pub struct FrameTable {
    entries: HashMap<ClaimId, FrameEntry>,
    fallback: Option<FrameEntry>,
}

impl FrameTable {
    pub fn new(entries: impl IntoIterator<Item = FrameEntry>) -> Self {
        FrameTable {
            entries: entries.into_iter().map(|e| (e.claim_id.clone(), e)).collect(),
            fallback: None,
        }
    }

    pub fn with_fallback(mut self, writer_intent: &str, reader_action: &str) -> Self {
        self.fallback = Some(FrameEntry {
            claim_id: ClaimId::new("*"),
            writer_intent: writer_intent.to_string(),
            reader_action: reader_action.to_string(),
            stance: None,
        });
        self
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let entries = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<FrameEntry>, _>>()?;
        Ok(FrameTable::new(entries))
    }
}

impl FrameProvider for FrameTable {
    fn slots(&self, claim: &Claim) -> Option<FrameSlots> {
        let entry = self.entries.get(&claim.id).or(self.fallback.as_ref())?;
        Some(FrameSlots {
            writer_intent: entry.writer_intent.clone(),
            reader_action: entry.reader_action.clone(),
            stance: entry
                .stance
                .unwrap_or_else(|| Stance::for_label(claim.veracity)),
        })
    }
}

/// Produces the intervention for any arm.
pub trait InterventionProvider: Send + Sync {
    fn intervention(
        &self,
        claim: &Claim,
        arm: InterventionArm,
        attrs: Option<&AttributeSet>,
    ) -> Result<InterventionText, InterventionError>;
}

/// Template arms are rendered directly; LLM arms go to an [`ExplanationSource`].
///
/// The label is always the claim's ground truth.
#[derive(Clone)]
pub struct InterventionRenderer {
    llm: Arc<dyn ExplanationSource>,
    frames: Arc<dyn FrameProvider>,
}

impl InterventionRenderer {
    pub fn new(llm: Arc<dyn ExplanationSource>, frames: Arc<dyn FrameProvider>) -> Self {
        InterventionRenderer { llm, frames }
    }
}

impl InterventionProvider for InterventionRenderer {
    fn intervention(
        &self,
        claim: &Claim,
        arm: InterventionArm,
        attrs: Option<&AttributeSet>,
    ) -> Result<InterventionText, InterventionError> {
        let label = claim.veracity;
        let id = claim.id.clone();
        let text = match arm {
            InterventionArm::Control => InterventionText::new(id, arm, label, ""),
            InterventionArm::LabelOnly => InterventionText::new(id, arm, label, label_sentence(label)),
            InterventionArm::MethodologyAi => {
                InterventionText::new(id, arm, label, methodology_text(label, MethodologySource::Ai))
            }
            InterventionArm::MethodologyHuman => InterventionText::new(
                id,
                arm,
                label,
                methodology_text(label, MethodologySource::Human),
            ),
            InterventionArm::ReactionFrame => {
                let slots = self
                    .frames
                    .slots(claim)
                    .ok_or_else(|| InterventionError::MissingSlots(claim.id.clone()))?;
                InterventionText::new(id, arm, label, reaction_frame_text(&claim.id, label, &slots)?)
            }
            InterventionArm::LlmZeroShot => self.llm.explanation(claim, None)?,
            InterventionArm::LlmPersonalized => {
                let attrs = attrs
                    .filter(|a| !a.is_empty())
                    .ok_or(InterventionError::EmptyAttributes)?;
                self.llm.explanation(claim, Some(attrs))?
            }
        };
        Ok(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Topic, Veracity};

    fn renderer() -> InterventionRenderer {
        let gen = ExplanationGenerator::new(mock::FixedLengthClient::new(20), GenerationConfig::default());
        let frames = FrameTable::new(vec![FrameEntry {
            claim_id: "known".into(),
            writer_intent: "the government is corrupt".into(),
            reader_action: "want to find out more".into(),
            stance: None,
        }]);
        InterventionRenderer::new(Arc::new(gen), Arc::new(frames))
    }

    fn claim(id: &str, v: Veracity) -> Claim {
        Claim::new(id.into(), "Headline", "src", None, v, Topic::Political).unwrap()
    }

    #[test]
    fn every_arm_shows_ground_truth() {
        let r = renderer();
        for v in Veracity::ALL {
            let c = claim("known", *v);
            for arm in InterventionArm::ALL.iter().copied() {
                let attrs = AttributeSet::parse("liberal").unwrap();
                let text = r.intervention(&c, arm, Some(&attrs)).unwrap();
                assert_eq!(text.label_shown, *v);
                assert_eq!(text.arm, arm);
            }
        }
    }

    #[test]
    fn control_has_no_explanation() {
        let t = renderer()
            .intervention(&claim("known", Veracity::True), InterventionArm::Control, None)
            .unwrap();
        assert!(t.explanation.is_empty());
        assert_eq!(t.word_count, 0);
    }

    #[test]
    fn reaction_frame_without_slots() {
        let err = renderer()
            .intervention(&claim("unknown", Veracity::False), InterventionArm::ReactionFrame, None)
            .unwrap_err();
        assert_eq!(err, InterventionError::MissingSlots("unknown".into()));
    }

    #[test]
    fn personalized_needs_attributes() {
        let err = renderer()
            .intervention(&claim("known", Veracity::False), InterventionArm::LlmPersonalized, None)
            .unwrap_err();
        assert_eq!(err, InterventionError::EmptyAttributes);
    }

    #[test]
    fn exactly_one_methodology_verb() {
        for v in Veracity::ALL {
            for src in [MethodologySource::Ai, MethodologySource::Human] {
                let t = methodology_text(*v, src);
                let verified = t.contains("verified");
                let refuted = t.contains("refuted");
                assert!(verified ^ refuted);
                assert_eq!(verified, *v == Veracity::True);
            }
        }
    }
}
