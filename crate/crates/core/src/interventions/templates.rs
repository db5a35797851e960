//! Fixed intervention wording and the two LLM prompt templates.
//!
//! Every string produced here is byte-stable: the quote characters are the
//! typographic `‘` and `’`, and nothing is escaped.

use serde::{Deserialize, Serialize};

use crate::domain::{AttributeKind, AttributeSet, Claim, ClaimId, InterventionArm, Veracity};

use super::InterventionError;

pub const MAX_WORDS: usize = 100;

const METHODOLOGY_AI: &str = "an AI model trained on a large-scale corpus of web data";
const METHODOLOGY_HUMAN: &str = "non-partisan fact-checkers";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodologySource {
    Ai,
    Human,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Persuade,
    Manipulate,
}

impl Stance {
    /// True claims persuade, false claims manipulate.
    pub fn for_label(label: Veracity) -> Self {
        match label {
            Veracity::True => Stance::Persuade,
            Veracity::False => Stance::Manipulate,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Persuade => "persuade",
            Stance::Manipulate => "manipulate",
        }
    }
}

/// Writer-intent and reader-action predictions for one headline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSlots {
    pub writer_intent: String,
    pub reader_action: String,
    pub stance: Stance,
}

pub fn label_sentence(label: Veracity) -> &'static str {
    match label {
        Veracity::True => "This claim is true.",
        Veracity::False => "This claim is false.",
    }
}

pub fn methodology_text(label: Veracity, source: MethodologySource) -> String {
    let verb = match label {
        Veracity::True => "verified",
        Veracity::False => "refuted",
    };
    let by = match source {
        MethodologySource::Ai => METHODOLOGY_AI,
        MethodologySource::Human => METHODOLOGY_HUMAN,
    };
    format!("This claim was {verb} by {by}.")
}

pub fn reaction_frame_text(
    claim_id: &ClaimId,
    label: Veracity,
    slots: &FrameSlots,
) -> Result<String, InterventionError> {
    let intent = slots.writer_intent.trim();
    let action = slots.reader_action.trim();
    if intent.is_empty() || action.is_empty() {
        return Err(InterventionError::MissingSlots(claim_id.clone()));
    }
    Ok(format!(
        "{} This headline is trying to {} readers by implying that {intent}. It is compelling readers to {action}.",
        label_sentence(label),
        slots.stance.as_str(),
    ))
}

/// A filled LLM prompt plus the identity used to cache its completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub template_id: InterventionArm,
    pub filled_prompt: String,
    pub max_words: usize,
    pub model_id: String,
    pub claim_id: ClaimId,
    pub label: Veracity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attrs: Option<AttributeSet>,
}

fn prompt_head(claim: &Claim) -> String {
    format!(
        "Write a short explanation for why the headline \u{2018}{}\u{2019} is ",
        claim.headline
    )
}

pub fn build_zero_shot_prompt(claim: &Claim, label: Veracity, model_id: &str) -> PromptRequest {
    let filled_prompt = format!(
        "{}\u{2018}{label}.\u{2019} Do not mention that you are AI. The explanation must be less than {MAX_WORDS} words.",
        prompt_head(claim)
    );
    PromptRequest {
        template_id: InterventionArm::LlmZeroShot,
        filled_prompt,
        max_words: MAX_WORDS,
        model_id: model_id.to_string(),
        claim_id: claim.id.clone(),
        label,
        attrs: None,
    }
}

pub fn build_personalized_prompt(
    claim: &Claim,
    label: Veracity,
    attrs: &AttributeSet,
    model_id: &str,
) -> Result<PromptRequest, InterventionError> {
    if attrs.is_empty() {
        return Err(InterventionError::EmptyAttributes);
    }
    let filled_prompt = format!(
        "{}\u{2018}{label}\u{2019} that will appeal to {}. Do not mention that you are AI. Do not mention the type of reader. The explanation must be less than {MAX_WORDS} words.",
        prompt_head(claim),
        audience_clause(attrs)
    );
    Ok(PromptRequest {
        template_id: InterventionArm::LlmPersonalized,
        filled_prompt,
        max_words: MAX_WORDS,
        model_id: model_id.to_string(),
        claim_id: claim.id.clone(),
        label,
        attrs: Some(attrs.clone()),
    })
}

/// `an uneducated, male, white, 18-29 year old reader with conservative political beliefs`.
///
/// Absent attributes drop out together with their connective text.
pub fn audience_clause(attrs: &AttributeSet) -> String {
    let mut descriptors = Vec::new();
    for kind in [
        AttributeKind::Education,
        AttributeKind::Gender,
        AttributeKind::Race,
        AttributeKind::Age,
    ] {
        if let Some(value) = attrs.get(kind) {
            if kind == AttributeKind::Age {
                descriptors.push(format!("{value} year old"));
            } else {
                descriptors.push(value);
            }
        }
    }
    let mut clause = if descriptors.is_empty() {
        "a reader".to_string()
    } else {
        let phrase = descriptors.join(", ");
        format!("{} {phrase} reader", indefinite_article(&phrase))
    };
    if let Some(politics) = attrs.politics {
        clause.push_str(&format!(" with {politics} political beliefs"));
    }
    clause
}

fn indefinite_article(phrase: &str) -> &'static str {
    let lower = phrase.to_ascii_lowercase();
    let vowel = lower.starts_with(['a', 'e', 'i', 'o', 'u']);
    // "an 18-29", "an 8", "an 11": numbers read with a leading vowel sound
    let numeric_vowel = lower.starts_with('8')
        || ((lower.starts_with("18") || lower.starts_with("11"))
            && !lower[2..].starts_with(|c: char| c.is_ascii_digit()));
    if vowel || numeric_vowel {
        "an"
    } else {
        "a"
    }
}
