//! Flattened, deduplicated view of a log ready for analysis.
//!
//! Only completed sessions of non-excluded users are kept. For each
//! (session, claim, phase) the judgment with the highest seq wins, so the
//! order of lines in the log never matters.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::domain::{
    Claim, ClaimId, EventKind, Helpfulness, InterventionArm, Judgment, Phase, SessionId, Topic,
    UserId, Veracity,
};
use crate::engine::config::ExperimentConfig;
use crate::engine::rules::{filter_spammers, Exclusions, SessionOutcome};
use crate::engine::{LogSnapshot, SessionInfo};
use crate::personalization::{alignment_between, AlignmentScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentObs {
    pub session_id: SessionId,
    pub user_id: UserId,
    pub arm: InterventionArm,
    pub trial: u32,
    pub claim_id: ClaimId,
    pub veracity: Veracity,
    pub topic: Topic,
    pub phase: Phase,
    pub judgment: Judgment,
}

/// One claim shown to one session in one phase, with the reactions it got.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impression {
    pub session_id: SessionId,
    pub arm: InterventionArm,
    pub claim_id: ClaimId,
    pub veracity: Veracity,
    pub topic: Topic,
    pub phase: Phase,
    pub liked: bool,
    pub shared: bool,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingObs {
    pub session_id: SessionId,
    pub user_id: UserId,
    pub arm: InterventionArm,
    pub claim_id: ClaimId,
    pub topic: Topic,
    pub rating: Helpfulness,
    /// Present for personalized explanations when the profile is known.
    pub alignment: Option<AlignmentScore>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFrame {
    pub sessions: Vec<SessionInfo>,
    pub judgments: Vec<JudgmentObs>,
    pub impressions: Vec<Impression>,
    pub ratings: Vec<RatingObs>,
    pub exclusions: Exclusions,
}

impl AnalysisFrame {
    pub fn build(snapshot: &LogSnapshot, dataset: &Dataset, config: &ExperimentConfig) -> Self {
        let index = snapshot.session_index();

        let mut events: Vec<_> = snapshot.events.iter().collect();
        events.sort_by(|a, b| (&a.session_id, a.seq).cmp(&(&b.session_id, b.seq)));

        let mut all_judgments: BTreeMap<&SessionId, Vec<Judgment>> = BTreeMap::new();
        for e in &events {
            if let (EventKind::VeracityJudgment, Some(j)) = (e.kind, e.judgment()) {
                all_judgments.entry(&e.session_id).or_default().push(j);
            }
        }
        let outcomes: Vec<SessionOutcome> = index
            .iter()
            .map(|s| SessionOutcome {
                user_id: s.user_id.clone(),
                completed: s.completed(),
                failed_attention: s.attention_passed == Some(false),
                judgments: all_judgments.get(&s.session_id).cloned().unwrap_or_default(),
            })
            .collect();
        let exclusions = filter_spammers(&outcomes, config);

        let kept: BTreeMap<SessionId, SessionInfo> = index
            .into_iter()
            .filter(|s| s.completed() && !exclusions.contains(&s.user_id))
            .map(|s| (s.session_id.clone(), s))
            .collect();

        // latest per key, since events are in seq order
        let mut judged: BTreeMap<(SessionId, ClaimId, Phase), Judgment> = BTreeMap::new();
        let mut rated: BTreeMap<(SessionId, ClaimId), Helpfulness> = BTreeMap::new();
        let mut reacted: BTreeSet<(SessionId, ClaimId, Phase, EventKind)> = BTreeSet::new();
        for e in events {
            if !kept.contains_key(&e.session_id) {
                continue;
            }
            let Some(claim) = e.claim_id.clone() else {
                continue;
            };
            match e.kind {
                EventKind::VeracityJudgment => {
                    if let Some(j) = e.judgment() {
                        judged.insert((e.session_id.clone(), claim, e.phase), j);
                    }
                }
                EventKind::HelpfulnessRating => {
                    if let Some(r) = e.rating() {
                        rated.insert((e.session_id.clone(), claim), r);
                    }
                }
                k if k.is_reaction() => {
                    reacted.insert((e.session_id.clone(), claim, e.phase, k));
                }
                _ => {}
            }
        }

        let claim = |id: &ClaimId| dataset.get(id);
        let mut judgments = Vec::new();
        for ((sid, cid, phase), judgment) in &judged {
            let (Some(s), Some(c)) = (kept.get(sid), claim(cid)) else {
                continue;
            };
            judgments.push(JudgmentObs {
                session_id: sid.clone(),
                user_id: s.user_id.clone(),
                arm: s.arm,
                trial: s.trial,
                claim_id: cid.clone(),
                veracity: c.veracity,
                topic: c.topic,
                phase: *phase,
                judgment: *judgment,
            });
        }

        let mut impressions = Vec::new();
        for s in kept.values() {
            for cid in &s.feed {
                let Some(c) = claim(cid) else { continue };
                let revealed = judged.contains_key(&(s.session_id.clone(), cid.clone(), Phase::Post));
                for phase in [Phase::Pre, Phase::Post] {
                    if phase == Phase::Post && !revealed {
                        continue;
                    }
                    let has = |k| reacted.contains(&(s.session_id.clone(), cid.clone(), phase, k));
                    impressions.push(Impression {
                        session_id: s.session_id.clone(),
                        arm: s.arm,
                        claim_id: cid.clone(),
                        veracity: c.veracity,
                        topic: c.topic,
                        phase,
                        liked: has(EventKind::Like),
                        shared: has(EventKind::Share),
                        flagged: has(EventKind::Flag),
                    });
                }
            }
        }

        let mut ratings = Vec::new();
        for ((sid, cid), rating) in rated {
            let (Some(s), Some(c)) = (kept.get(&sid), claim(&cid)) else {
                continue;
            };
            let alignment = match (&s.self_reported, s.interventions.get(&cid)) {
                (Some(me), Some(text)) => text
                    .generation_attrs
                    .as_ref()
                    .and_then(|g| alignment_between(me, g).ok()),
                _ => None,
            };
            ratings.push(RatingObs {
                session_id: sid.clone(),
                user_id: s.user_id.clone(),
                arm: s.arm,
                claim_id: cid,
                topic: c.topic,
                rating,
                alignment,
            });
        }

        AnalysisFrame {
            sessions: kept.into_values().collect(),
            judgments,
            impressions,
            ratings,
            exclusions,
        }
    }

    /// Keep only observations about claims matching `pred`.
    pub fn restrict(&self, dataset: &Dataset, pred: impl Fn(&Claim) -> bool) -> Self {
        let ok = |id: &ClaimId| dataset.get(id).is_some_and(&pred);
        AnalysisFrame {
            sessions: self.sessions.clone(),
            judgments: self.judgments.iter().filter(|j| ok(&j.claim_id)).cloned().collect(),
            impressions: self.impressions.iter().filter(|i| ok(&i.claim_id)).cloned().collect(),
            ratings: self.ratings.iter().filter(|r| ok(&r.claim_id)).cloned().collect(),
            exclusions: self.exclusions.clone(),
        }
    }

    pub fn arms(&self) -> Vec<InterventionArm> {
        let arms: BTreeSet<InterventionArm> = self.sessions.iter().map(|s| s.arm).collect();
        arms.into_iter().collect()
    }

    /// Whether a post-phase judgment exists for this (session, claim).
    pub fn revealed(&self) -> BTreeSet<(SessionId, ClaimId)> {
        self.judgments
            .iter()
            .filter(|j| j.phase == Phase::Post)
            .map(|j| (j.session_id.clone(), j.claim_id.clone()))
            .collect()
    }
}
