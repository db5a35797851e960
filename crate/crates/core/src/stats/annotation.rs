//! Aggregation of manual annotations of explanation quality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::ClaimId;

use super::StatsError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub claim_id: ClaimId,
    pub reasoning_accurate: bool,
    pub commonsense: bool,
    pub event_knowledge: bool,
    pub domain_knowledge: bool,
    pub annotator_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationFlag {
    ReasoningAccurate,
    Commonsense,
    EventKnowledge,
    DomainKnowledge,
}

impl AnnotationFlag {
    pub const ALL: [AnnotationFlag; 4] = [
        AnnotationFlag::ReasoningAccurate,
        AnnotationFlag::Commonsense,
        AnnotationFlag::EventKnowledge,
        AnnotationFlag::DomainKnowledge,
    ];

    fn get(self, r: &AnnotationRecord) -> bool {
        match self {
            AnnotationFlag::ReasoningAccurate => r.reasoning_accurate,
            AnnotationFlag::Commonsense => r.commonsense,
            AnnotationFlag::EventKnowledge => r.event_knowledge,
            AnnotationFlag::DomainKnowledge => r.domain_knowledge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagSummary {
    /// Claims whose majority vote is true, in percent of decided claims.
    pub pct: f64,
    pub decided: usize,
    pub ties: Vec<ClaimId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSummary {
    pub claims: usize,
    /// Share of claims whose reasoning was judged inaccurate.
    pub erroneous_pct: f64,
    pub flags: BTreeMap<AnnotationFlag, FlagSummary>,
}

impl AnnotationSummary {
    pub fn pct(&self, flag: AnnotationFlag) -> f64 {
        self.flags[&flag].pct
    }

    /// Every claim that tied on at least one flag.
    pub fn ties(&self) -> Vec<ClaimId> {
        let mut all: Vec<ClaimId> = self.flags.values().flat_map(|f| f.ties.clone()).collect();
        all.sort();
        all.dedup();
        all
    }
}

/// Majority vote per claim and flag. Tied claims are listed and left out of
/// that flag's denominator.
pub fn annotation_summary(records: &[AnnotationRecord]) -> Result<AnnotationSummary, StatsError> {
    if records.is_empty() {
        return Err(StatsError::EmptySelection("no annotation records".into()));
    }
    let mut by_claim: BTreeMap<&ClaimId, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        by_claim.entry(&r.claim_id).or_default().push(r);
    }
    let mut flags = BTreeMap::new();
    for flag in AnnotationFlag::ALL {
        let mut yes = 0usize;
        let mut decided = 0usize;
        let mut ties = Vec::new();
        for (claim, votes) in &by_claim {
            let pos = votes.iter().filter(|r| flag.get(r)).count();
            let neg = votes.len() - pos;
            if pos == neg {
                ties.push((*claim).clone());
                continue;
            }
            decided += 1;
            yes += usize::from(pos > neg);
        }
        let pct = if decided == 0 { 0.0 } else { 100.0 * yes as f64 / decided as f64 };
        flags.insert(flag, FlagSummary { pct, decided, ties });
    }
    let accurate = &flags[&AnnotationFlag::ReasoningAccurate];
    let erroneous_pct = if accurate.decided == 0 { 0.0 } else { 100.0 - accurate.pct };
    Ok(AnnotationSummary {
        claims: by_claim.len(),
        erroneous_pct,
        flags,
    })
}
