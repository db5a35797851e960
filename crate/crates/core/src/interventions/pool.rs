//! Explanations generated ahead of time and served by lookup.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::domain::{AttributeSet, Claim, ClaimId, InterventionArm, InterventionText, Veracity};

use super::{ExplanationSource, InterventionError};

/// One line of the interventions JSON-lines file written by batch generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedIntervention {
    pub claim_id: ClaimId,
    pub arm: InterventionArm,
    pub label: Veracity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    pub explanation: String,
    pub word_count: usize,
    pub over_limit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_attrs: Option<AttributeSet>,
}

impl GeneratedIntervention {
    pub fn from_text(text: &InterventionText, prompt: Option<String>) -> Self {
        GeneratedIntervention {
            claim_id: text.claim_id.clone(),
            arm: text.arm,
            label: text.label_shown,
            prompt,
            explanation: text.explanation.clone(),
            word_count: text.word_count,
            over_limit: text.over_limit,
            generation_attrs: text.generation_attrs.clone(),
        }
    }

    fn to_text(&self) -> InterventionText {
        let mut text =
            InterventionText::new(self.claim_id.clone(), self.arm, self.label, self.explanation.clone());
        text.generation_attrs = self.generation_attrs.clone();
        text.over_limit = self.over_limit;
        text
    }
}

/// Lookup over pregenerated LLM explanations.
///
/// Personalized requests are answered with the explanation whose generation
/// attributes agree with the requested ones on the most attributes; ties go
/// to the lexicographically smallest attribute key.
#[derive(Debug, Clone, Default)]
pub struct PregeneratedPool {
    zero_shot: HashMap<ClaimId, GeneratedIntervention>,
    personalized: HashMap<ClaimId, Vec<GeneratedIntervention>>,
}

impl PregeneratedPool {
    pub fn from_records(records: impl IntoIterator<Item = GeneratedIntervention>) -> Self {
        let mut pool = PregeneratedPool::default();
        for r in records {
            match (r.arm, &r.generation_attrs) {
                (InterventionArm::LlmPersonalized, Some(_)) => {
                    pool.personalized.entry(r.claim_id.clone()).or_default().push(r)
                }
                (InterventionArm::LlmZeroShot, _) => {
                    pool.zero_shot.insert(r.claim_id.clone(), r);
                }
                _ => {}
            }
        }
        for list in pool.personalized.values_mut() {
            list.sort_by_key(|r| r.generation_attrs.as_ref().map(AttributeSet::key));
        }
        pool
    }

    pub fn len(&self) -> usize {
        self.zero_shot.len() + self.personalized.values().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn overlap(a: &AttributeSet, b: &AttributeSet) -> usize {
    a.values()
        .into_iter()
        .filter(|(kind, value)| b.get(*kind).as_deref() == Some(value.as_str()))
        .count()
}

impl ExplanationSource for PregeneratedPool {
    fn explanation(
        &self,
        claim: &Claim,
        attrs: Option<&AttributeSet>,
    ) -> Result<InterventionText, InterventionError> {
        let missing = || InterventionError::NotPregenerated(claim.id.clone());
        match attrs {
            None => self.zero_shot.get(&claim.id).map(|r| r.to_text()).ok_or_else(missing),
            Some(wanted) => {
                if wanted.is_empty() {
                    return Err(InterventionError::EmptyAttributes);
                }
                let candidates = self.personalized.get(&claim.id).ok_or_else(missing)?;
                // candidates are key-sorted, so max_by_key's last-wins needs a reversed scan
                candidates
                    .iter()
                    .rev()
                    .max_by_key(|r| overlap(r.generation_attrs.as_ref().expect("personalized"), wanted))
                    .map(|r| r.to_text())
                    .ok_or_else(missing)
            }
        }
    }
}
