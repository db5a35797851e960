//! Simulated participants that play sessions through an [`ExperimentApi`].
//!
//! Agents know each claim's ground truth from the dataset and answer
//! correctly with `base_accuracy`. After the pop-up they adopt the shown
//! label with `adoption_prob`. Reactions depend on what the agent currently
//! believes about the claim.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::domain::{
    AttributeKind, AttributeSet, Claim, ClaimId, EventKind, Helpfulness, InterventionArm, Judgment,
    Phase, SessionId, SurveyAnswer, Topic, UserId,
};
use crate::engine::{
    AttentionAnswers, CreateSessionRequest, EngineError, EventInput, ExperimentApi,
    QuestionnaireSubmission, SessionView, Stage,
};
use crate::personalization::{alignment_between, classify_alignment, Alignment, ReferenceTable};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("engine unavailable: {0}")]
    EngineUnavailable(String),
    #[error("engine rejected an agent action: {0}")]
    Engine(EngineError),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

impl From<EngineError> for SimError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Unavailable { message } => SimError::EngineUnavailable(message),
            other => SimError::Engine(other),
        }
    }
}

/// Reaction probability given the agent's current belief about a claim.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefProbs {
    pub believed_true: f64,
    pub believed_false: f64,
    pub uncertain: f64,
}

impl BeliefProbs {
    pub fn new(believed_true: f64, believed_false: f64, uncertain: f64) -> Self {
        BeliefProbs { believed_true, believed_false, uncertain }
    }

    pub fn constant(p: f64) -> Self {
        BeliefProbs::new(p, p, p)
    }

    fn get(&self, belief: Judgment) -> f64 {
        match belief {
            Judgment::True => self.believed_true,
            Judgment::False => self.believed_false,
            Judgment::Uncertain => self.uncertain,
        }
    }

    fn all(&self) -> [f64; 3] {
        [self.believed_true, self.believed_false, self.uncertain]
    }
}

/// Likert distribution (ratings 1 to 4) per alignment band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HelpfulnessPolicy {
    pub aligned: [f64; 4],
    pub misaligned: [f64; 4],
    pub non_personalized: [f64; 4],
}

impl Default for HelpfulnessPolicy {
    fn default() -> Self {
        HelpfulnessPolicy {
            aligned: [0.10, 0.20, 0.40, 0.30],
            misaligned: [0.15, 0.30, 0.35, 0.20],
            non_personalized: [0.12, 0.27, 0.39, 0.22],
        }
    }
}

impl HelpfulnessPolicy {
    pub fn uniform_bands(dist: [f64; 4]) -> Self {
        HelpfulnessPolicy { aligned: dist, misaligned: dist, non_personalized: dist }
    }

    pub fn mean(dist: &[f64; 4]) -> f64 {
        dist.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }
}

/// Accuracy shift on one topic depending on the agent's politics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartisanBias {
    pub topic: Topic,
    /// Keyed by politics value, e.g. "conservative".
    pub shift: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentPolicy {
    pub base_accuracy: f64,
    /// Share of wrong pre-judgments given as "uncertain".
    pub uncertain_prob: f64,
    pub adoption_prob: f64,
    pub open_prob: f64,
    pub like_bias: BeliefProbs,
    pub share_bias: BeliefProbs,
    pub flag_bias: BeliefProbs,
    pub helpfulness: HelpfulnessPolicy,
    /// Self-reported attributes. `None` draws a group per agent.
    pub profile: Option<AttributeSet>,
    pub partisan_bias: Option<PartisanBias>,
    pub alignment_threshold: f64,
    pub attention_fail_prob: f64,
    /// Leave without submitting.
    pub abandon_prob: f64,
    /// Give this label to every claim in both phases.
    pub constant_label: Option<Judgment>,
    /// Sessions played under the same user id.
    pub sessions: usize,
}

impl Default for AgentPolicy {
    fn default() -> Self {
        AgentPolicy {
            base_accuracy: 0.5,
            uncertain_prob: 0.0,
            adoption_prob: 0.9,
            open_prob: 1.0,
            like_bias: BeliefProbs::new(0.35, 0.05, 0.10),
            share_bias: BeliefProbs::new(0.15, 0.03, 0.05),
            flag_bias: BeliefProbs::new(0.02, 0.35, 0.10),
            helpfulness: HelpfulnessPolicy::default(),
            profile: None,
            partisan_bias: None,
            alignment_threshold: crate::personalization::DEFAULT_ALIGNMENT_THRESHOLD,
            attention_fail_prob: 0.0,
            abandon_prob: 0.0,
            constant_label: None,
            sessions: 1,
        }
    }
}

impl AgentPolicy {
    pub fn validate(&self) -> Result<(), SimError> {
        let mut probs = vec![
            ("base_accuracy", self.base_accuracy),
            ("uncertain_prob", self.uncertain_prob),
            ("adoption_prob", self.adoption_prob),
            ("open_prob", self.open_prob),
            ("attention_fail_prob", self.attention_fail_prob),
            ("abandon_prob", self.abandon_prob),
            ("alignment_threshold", self.alignment_threshold),
        ];
        for (name, b) in [("like_bias", self.like_bias), ("share_bias", self.share_bias), ("flag_bias", self.flag_bias)] {
            probs.extend(b.all().into_iter().map(|p| (name, p)));
        }
        if let Some((name, p)) = probs.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(SimError::InvalidPolicy(format!("{name} = {p} is not a probability")));
        }
        let h = &self.helpfulness;
        for dist in [&h.aligned, &h.misaligned, &h.non_personalized] {
            if dist.iter().any(|p| !(0.0..=1.0).contains(p)) || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
                return Err(SimError::InvalidPolicy(format!("helpfulness distribution {dist:?} must sum to 1")));
            }
        }
        if self.sessions == 0 {
            return Err(SimError::InvalidPolicy("sessions must be at least 1".into()));
        }
        Ok(())
    }

    fn accuracy_for(&self, claim: &Claim, me: &AttributeSet) -> f64 {
        let shift = self.partisan_bias.as_ref().and_then(|b| {
            let politics = me.get(AttributeKind::Politics)?;
            (b.topic == claim.topic).then(|| b.shift.get(&politics).copied()).flatten()
        });
        (self.base_accuracy + shift.unwrap_or(0.0)).clamp(0.0, 1.0)
    }
}

/// One default policy with optional per-arm overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyMix {
    pub default: AgentPolicy,
    pub per_arm: BTreeMap<InterventionArm, AgentPolicy>,
}

impl PolicyMix {
    pub fn uniform(policy: AgentPolicy) -> Self {
        PolicyMix { default: policy, per_arm: BTreeMap::new() }
    }

    pub fn with_arm(mut self, arm: InterventionArm, policy: AgentPolicy) -> Self {
        self.per_arm.insert(arm, policy);
        self
    }

    pub fn for_arm(&self, arm: InterventionArm) -> &AgentPolicy {
        self.per_arm.get(&arm).unwrap_or(&self.default)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.default.validate()?;
        self.per_arm.values().try_for_each(AgentPolicy::validate)
    }
}

pub struct Cohort<'a> {
    pub dataset: &'a Dataset,
    pub reference: Option<&'a ReferenceTable>,
    pub seed: u64,
    /// Sessions played at once.
    pub parallelism: usize,
    /// Agent `i` plays as user `{user_prefix}{i:06}`.
    pub user_prefix: &'a str,
}

impl<'a> Cohort<'a> {
    pub fn new(dataset: &'a Dataset, seed: u64) -> Self {
        Cohort { dataset, reference: None, seed, parallelism: 1, user_prefix: "u" }
    }

    pub fn with_reference(mut self, table: Option<&'a ReferenceTable>) -> Self {
        self.reference = table;
        self
    }

    pub fn with_parallelism(mut self, n: usize) -> Self {
        self.parallelism = n;
        self
    }

    pub fn with_user_prefix(mut self, prefix: &'a str) -> Self {
        self.user_prefix = prefix;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub agents: usize,
    pub sessions: usize,
    pub completed: usize,
    pub failed_attention: usize,
    pub abandoned: usize,
    pub events: usize,
    pub per_arm: BTreeMap<InterventionArm, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ending {
    Completed,
    FailedAttention,
    Abandoned,
}

fn agent_rng(seed: u64, agent: usize, session: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((session as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    rng.set_stream(agent as u64);
    rng
}

fn profile_rng(seed: u64, agent: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(agent as u64);
    rng
}

fn likert<R: Rng>(dist: &[f64; 4], rng: &mut R) -> Helpfulness {
    let mut u: f64 = rng.random();
    for (i, p) in dist.iter().enumerate() {
        if u < *p {
            return Helpfulness::new(i as u8 + 1).expect("1..=4");
        }
        u -= p;
    }
    Helpfulness::new(4).expect("4 is valid")
}

fn judge<R: Rng>(policy: &AgentPolicy, claim: &Claim, me: &AttributeSet, rng: &mut R) -> Judgment {
    if let Some(label) = policy.constant_label {
        return label;
    }
    if rng.random_bool(policy.accuracy_for(claim, me)) {
        return claim.veracity.into();
    }
    if rng.random_bool(policy.uncertain_prob) {
        Judgment::Uncertain
    } else {
        claim.veracity.negate().into()
    }
}

fn draw_profile<R: Rng>(reference: Option<&ReferenceTable>, rng: &mut R) -> AttributeSet {
    match reference {
        Some(t) if !t.groups().is_empty() => t.groups().choose(rng).expect("non-empty").clone(),
        _ => crate::fixtures::phase_two_groups()
            .choose(rng)
            .expect("six groups")
            .clone(),
    }
}

/// Survey answers drawn from the agent's own group row, or uniformly when
/// the agent's profile is not a group of the table.
fn survey<R: Rng>(reference: Option<&ReferenceTable>, me: &AttributeSet, rng: &mut R) -> Vec<SurveyAnswer> {
    let Some(table) = reference else {
        return Vec::new();
    };
    let group = table.group_keys().iter().position(|k| *k == me.key());
    table
        .questions()
        .map(|(q, answers)| {
            let weights: Vec<f64> = answers
                .iter()
                .map(|a| group.and_then(|g| table.probability(g, q, a)).unwrap_or(1.0))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = answers.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            SurveyAnswer::new(q, answers[pick].clone())
        })
        .collect()
}

struct Agent<'a> {
    api: &'a dyn ExperimentApi,
    cohort: &'a Cohort<'a>,
    policy: &'a AgentPolicy,
    me: AttributeSet,
    rng: ChaCha8Rng,
    events: usize,
}

impl Agent<'_> {
    fn post(&mut self, sid: &SessionId, e: EventInput) -> Result<(), SimError> {
        self.api.post_event(sid, &e)?;
        self.events += 1;
        Ok(())
    }

    fn react(&mut self, sid: &SessionId, claim: &ClaimId, phase: Phase, belief: Judgment) -> Result<bool, SimError> {
        let mut any = false;
        for (kind, bias) in [
            (EventKind::Like, self.policy.like_bias),
            (EventKind::Share, self.policy.share_bias),
            (EventKind::Flag, self.policy.flag_bias),
        ] {
            if self.rng.random_bool(bias.get(belief)) {
                self.post(sid, EventInput::reaction(claim, kind, phase))?;
                any = true;
            }
        }
        Ok(any)
    }

    fn play(&mut self, view: &SessionView) -> Result<Ending, SimError> {
        let sid = &view.session_id;
        let policy = self.policy;
        while self.api.session(sid)?.stage < Stage::Questionnaire {
            self.api.advance(sid)?;
        }
        let fail = self.rng.random_bool(policy.attention_fail_prob);
        let attention = if fail {
            AttentionAnswers::new(view.min_interactions as i64 + 1, view.feed_size as i64 + 1)
        } else {
            AttentionAnswers::new(view.min_interactions as i64, view.feed_size as i64)
        };
        let form = QuestionnaireSubmission {
            self_reported: self.me.clone(),
            survey_answers: survey(self.cohort.reference, &self.me, &mut self.rng),
            attention,
        };
        if !self.api.submit_questionnaire(sid, &form)?.passed {
            return Ok(Ending::FailedAttention);
        }

        let feed = self.api.feed(sid)?;
        let mut reacted: Vec<ClaimId> = Vec::new();
        for post in &feed.posts {
            let claim = self
                .cohort
                .dataset
                .get(&post.claim_id)
                .ok_or_else(|| SimError::InvalidPolicy(format!("claim `{}` missing from the dataset", post.claim_id)))?
                .clone();
            let pre = judge(policy, &claim, &self.me, &mut self.rng);
            if self.react(sid, &claim.id, Phase::Pre, pre)? {
                reacted.push(claim.id.clone());
            }
            if !self.rng.random_bool(policy.open_prob) {
                continue;
            }
            self.api.step1(sid, &claim.id)?;
            self.post(sid, EventInput::judgment(&claim.id, Phase::Pre, pre))?;
            let step2 = self.api.step2(sid, &claim.id)?;
            let post_belief = match (policy.constant_label, step2.label) {
                (Some(l), _) => l,
                (None, Some(label)) if self.rng.random_bool(policy.adoption_prob) => label.into(),
                _ => pre,
            };
            self.post(sid, EventInput::judgment(&claim.id, Phase::Post, post_belief))?;
            if step2.rate_helpfulness {
                let h = &policy.helpfulness;
                let dist = match &step2.audience {
                    Some(aud) => match alignment_between(&self.me, aud) {
                        Ok(s) if classify_alignment(s.value(), policy.alignment_threshold) == Alignment::Aligned => &h.aligned,
                        _ => &h.misaligned,
                    },
                    None => &h.non_personalized,
                };
                let rating = likert(dist, &mut self.rng);
                self.post(sid, EventInput::helpfulness(&claim.id, rating))?;
            }
            if self.react(sid, &claim.id, Phase::Post, post_belief)? && !reacted.contains(&claim.id) {
                reacted.push(claim.id.clone());
            }
        }

        if self.rng.random_bool(policy.abandon_prob) {
            return Ok(Ending::Abandoned);
        }
        // top up with likes so the session can be submitted
        for post in &feed.posts {
            if reacted.len() >= feed.min_interactions {
                break;
            }
            if !reacted.contains(&post.claim_id) {
                self.post(sid, EventInput::reaction(&post.claim_id, EventKind::Like, Phase::Pre))?;
                reacted.push(post.claim_id.clone());
            }
        }
        let out = self.api.submit(sid)?;
        Ok(if out.accepted { Ending::Completed } else { Ending::Abandoned })
    }
}

/// Plays `n_agents` agents against `api`.
///
/// Sessions are created in agent order first, so agent `i` always gets the
/// same session ids and arms. The sessions are then played with up to
/// `parallelism` at a time.
pub fn run_cohort(
    api: &dyn ExperimentApi,
    n_agents: usize,
    mix: &PolicyMix,
    cohort: &Cohort<'_>,
) -> Result<CohortSummary, SimError> {
    mix.validate()?;
    if cohort.parallelism == 0 {
        return Err(SimError::InvalidPolicy("parallelism must be at least 1".into()));
    }
    let mut plan = Vec::new();
    let mut profiles = Vec::with_capacity(n_agents);
    for agent in 0..n_agents {
        let user = UserId::new(format!("{}{agent:06}", cohort.user_prefix));
        let req = CreateSessionRequest { user_id: Some(user) };
        let first = api.create_session(&req)?;
        let policy = mix.for_arm(first.arm);
        profiles.push(
            policy
                .profile
                .clone()
                .unwrap_or_else(|| draw_profile(cohort.reference, &mut profile_rng(cohort.seed, agent))),
        );
        plan.push((agent, 0, first));
        for session_no in 1..policy.sessions {
            plan.push((agent, session_no, api.create_session(&req)?));
        }
    }

    let play = |(agent, session_no, view): &(usize, usize, SessionView)| -> Result<(Ending, usize), SimError> {
        let mut a = Agent {
            api,
            cohort,
            policy: mix.for_arm(view.arm),
            me: profiles[*agent].clone(),
            rng: agent_rng(cohort.seed, *agent, *session_no),
            events: 0,
        };
        let ending = a.play(view)?;
        Ok((ending, a.events))
    };
    let results: Vec<(Ending, usize)> = if cohort.parallelism == 1 {
        plan.iter().map(play).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cohort.parallelism)
            .build()
            .map_err(|e| SimError::InvalidPolicy(e.to_string()))?;
        pool.install(|| plan.par_iter().map(play).collect::<Result<_, _>>())?
    };

    let mut summary = CohortSummary {
        agents: n_agents,
        sessions: plan.len(),
        ..CohortSummary::default()
    };
    for ((_, _, view), (ending, events)) in plan.iter().zip(&results) {
        *summary.per_arm.entry(view.arm).or_insert(0) += 1;
        summary.events += events;
        match ending {
            Ending::Completed => summary.completed += 1,
            Ending::FailedAttention => summary.failed_attention += 1,
            Ending::Abandoned => summary.abandoned += 1,
        }
    }
    Ok(summary)
}

/// Expected post accuracy of an agent who always opens the pop-up.
pub fn expected_post_accuracy(policy: &AgentPolicy) -> f64 {
    policy.adoption_prob + (1.0 - policy.adoption_prob) * policy.base_accuracy
}
