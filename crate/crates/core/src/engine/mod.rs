//! Participant sessions: consent, instructions, questionnaire with
//! attention checks, then the feed with its two-step intervention pop-up.
//!
//! All mutations of one session happen under that session's lock, and every
//! accepted event is appended to the log before the call returns.

pub mod config;
pub mod rules;
pub mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::domain::{
    validate_event, AttributeSet, ClaimId, EventKind, EventRejection, Helpfulness,
    InteractionEvent, InterventionArm, InterventionText, Judgment, Payload, Phase, SessionId,
    SessionLedger, SurveyAnswer, UserId, Veracity,
};
use crate::interventions::InterventionProvider;
use crate::personalization::{infer_attributes, ReferenceTable};

pub use config::{Assignment, ConfigError, ExperimentConfig};
pub use rules::{
    assign_arm, assign_arm_blocked, check_attention, enforce_completion, filter_spammers, sample_feed, AnswerValue,
    AttentionAnswers, Completion, Exclusions, SessionOutcome,
};
pub use store::{read_log, recover, EventStore, LogSnapshot, SessionInfo, SessionRecord, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Consent,
    Instructions,
    Questionnaire,
    Feed,
    Done,
    Disqualified,
}

impl Stage {
    pub fn is_closed(self) -> bool {
        matches!(self, Stage::Done | Stage::Disqualified)
    }
}

/// Source of event timestamps, in milliseconds.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Returns `start`, `start + 1`, ... on successive calls.
pub struct LogicalClock(AtomicU64);

impl LogicalClock {
    pub fn new(start: u64) -> Self {
        LogicalClock(AtomicU64::new(start))
    }
}

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.0.fetch_add(1, Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "code", content = "detail", rename_all = "snake_case")]
pub enum EngineError {
    #[error("unknown session `{session_id}`")]
    UnknownSession { session_id: String },
    #[error("session is in stage {actual:?}, expected {expected:?}")]
    WrongStage { expected: Stage, actual: Stage },
    #[error("session is closed ({stage:?})")]
    SessionClosed { stage: Stage },
    #[error("phase violation on claim `{claim}`: {reason}")]
    PhaseViolation { claim: String, reason: String },
    #[error("event seq {got} is not after {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("claim `{claim}` is not in this session's feed")]
    UnknownClaim { claim: String },
    #[error("event belongs to session `{got}`, not `{expected}`")]
    SessionMismatch { expected: String, got: String },
    #[error("payload does not fit a `{kind}` event")]
    MalformedPayload { kind: String },
    #[error("dataset too small: need {needed} claims, have {available}")]
    DatasetTooSmall { needed: usize, available: usize },
    #[error("intervention generation failed: {message}")]
    Generation { message: String },
    #[error("storage failure: {message}")]
    Storage { message: String },
    #[error("invalid input: {message}")]
    InvalidInput { message: String },
    #[error("engine unavailable: {message}")]
    Unavailable { message: String },
}

impl EngineError {
    pub fn code(&self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.get("code").and_then(|c| c.as_str()).map(String::from))
            .unwrap_or_else(|| "internal".into())
    }

    pub fn to_api(&self) -> ApiError {
        let v = serde_json::to_value(self).expect("errors serialize");
        ApiError {
            code: self.code(),
            message: self.to_string(),
            detail: v.get("detail").cloned().unwrap_or(serde_json::Value::Null),
        }
    }

    pub fn from_api(err: ApiError) -> Self {
        let tagged = serde_json::json!({"code": err.code, "detail": err.detail});
        serde_json::from_value(tagged).unwrap_or(EngineError::Unavailable {
            message: format!("{}: {}", err.code, err.message),
        })
    }

    fn invalid(message: impl Into<String>) -> Self {
        EngineError::InvalidInput {
            message: message.into(),
        }
    }
}

impl From<EventRejection> for EngineError {
    fn from(r: EventRejection) -> Self {
        match r {
            EventRejection::OutOfOrder { last, got } => EngineError::OutOfOrder { last, got },
            EventRejection::PhaseViolation { claim, reason } => {
                EngineError::PhaseViolation { claim, reason }
            }
            EventRejection::UnknownClaim { claim } => EngineError::UnknownClaim { claim },
            EventRejection::SessionMismatch { expected, got } => {
                EngineError::SessionMismatch { expected, got }
            }
            EventRejection::MalformedPayload { kind } => EngineError::MalformedPayload { kind },
        }
    }
}

impl From<StoreError> for EngineError {
    fn from(e: StoreError) -> Self {
        EngineError::Storage {
            message: e.to_string(),
        }
    }
}

impl From<crate::interventions::InterventionError> for EngineError {
    fn from(e: crate::interventions::InterventionError) -> Self {
        EngineError::Generation {
            message: e.to_string(),
        }
    }
}

/// Error body of the HTTP API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub user_id: Option<UserId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: SessionId,
    pub user_id: UserId,
    pub arm: InterventionArm,
    pub stage: Stage,
    pub feed: Vec<ClaimId>,
    pub feed_size: usize,
    pub min_interactions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedPost {
    pub claim_id: ClaimId,
    pub headline: String,
    pub source: String,
    pub image_ref: Option<String>,
    pub liked: bool,
    pub shared: bool,
    pub flagged: bool,
    pub opened: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedView {
    pub session_id: SessionId,
    pub stage: Stage,
    pub posts: Vec<FeedPost>,
    pub interactions_done: usize,
    pub min_interactions: usize,
    pub can_submit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireSubmission {
    pub self_reported: AttributeSet,
    #[serde(default)]
    pub survey_answers: Vec<SurveyAnswer>,
    pub attention: AttentionAnswers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionnaireOutcome {
    pub passed: bool,
    pub stage: Stage,
}

/// A participant action as sent by a client. The server assigns `seq`
/// and the timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventInput {
    #[serde(default)]
    pub claim_id: Option<ClaimId>,
    pub kind: EventKind,
    pub phase: Phase,
    #[serde(default = "none_payload")]
    pub payload: Payload,
}

fn none_payload() -> Payload {
    Payload::None
}

impl EventInput {
    pub fn reaction(claim: &ClaimId, kind: EventKind, phase: Phase) -> Self {
        EventInput {
            claim_id: Some(claim.clone()),
            kind,
            phase,
            payload: Payload::None,
        }
    }

    pub fn judgment(claim: &ClaimId, phase: Phase, judgment: Judgment) -> Self {
        EventInput {
            claim_id: Some(claim.clone()),
            kind: EventKind::VeracityJudgment,
            phase,
            payload: Payload::judgment(judgment),
        }
    }

    pub fn helpfulness(claim: &ClaimId, rating: Helpfulness) -> Self {
        EventInput {
            claim_id: Some(claim.clone()),
            kind: EventKind::HelpfulnessRating,
            phase: Phase::Post,
            payload: Payload::rating(rating),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventAck {
    pub seq: u64,
}

pub const RELIABILITY_QUESTION: &str = "Is this claim true, false, or uncertain?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step1View {
    pub claim_id: ClaimId,
    pub headline: String,
    pub question: String,
    pub options: Vec<Judgment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step2View {
    pub claim_id: ClaimId,
    pub arm: InterventionArm,
    /// `None` in the control arm.
    pub label: Option<Veracity>,
    pub explanation: Option<String>,
    /// Attributes a personalized explanation was written for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audience: Option<AttributeSet>,
    pub question: String,
    pub rate_helpfulness: bool,
    pub helpfulness_scale: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub accepted: bool,
    pub interacted_claims: usize,
    pub required: usize,
    pub stage: Stage,
}

/// The operations a participant client can perform, in-process or over HTTP.
pub trait ExperimentApi: Send + Sync {
    fn create_session(&self, req: &CreateSessionRequest) -> Result<SessionView, EngineError>;
    fn session(&self, id: &SessionId) -> Result<SessionView, EngineError>;
    fn feed(&self, id: &SessionId) -> Result<FeedView, EngineError>;
    /// Consent to instructions, instructions to questionnaire.
    fn advance(&self, id: &SessionId) -> Result<SessionView, EngineError>;
    fn submit_questionnaire(
        &self,
        id: &SessionId,
        form: &QuestionnaireSubmission,
    ) -> Result<QuestionnaireOutcome, EngineError>;
    fn post_event(&self, id: &SessionId, event: &EventInput) -> Result<EventAck, EngineError>;
    fn step1(&self, id: &SessionId, claim: &ClaimId) -> Result<Step1View, EngineError>;
    fn step2(&self, id: &SessionId, claim: &ClaimId) -> Result<Step2View, EngineError>;
    fn submit(&self, id: &SessionId) -> Result<SubmitOutcome, EngineError>;
}

struct SessionState {
    info: SessionInfo,
    ledger: SessionLedger,
    reactions: BTreeMap<ClaimId, BTreeSet<EventKind>>,
}

impl SessionState {
    fn new(info: SessionInfo) -> Self {
        let ledger = SessionLedger::new(info.session_id.clone(), info.feed.clone());
        SessionState {
            info,
            ledger,
            reactions: BTreeMap::new(),
        }
    }

    fn apply(&mut self, event: &InteractionEvent) {
        self.ledger.apply(event);
        if let Some(claim) = &event.claim_id {
            if event.kind.is_reaction() {
                self.reactions
                    .entry(claim.clone())
                    .or_default()
                    .insert(event.kind);
            }
        }
    }

    fn require_stage(&self, expected: Stage) -> Result<(), EngineError> {
        let actual = self.info.stage;
        if actual.is_closed() {
            return Err(EngineError::SessionClosed { stage: actual });
        }
        if actual != expected {
            return Err(EngineError::WrongStage { expected, actual });
        }
        Ok(())
    }

    fn require_claim(&self, claim: &ClaimId) -> Result<(), EngineError> {
        if self.ledger.in_feed(claim) {
            Ok(())
        } else {
            Err(EngineError::UnknownClaim {
                claim: claim.to_string(),
            })
        }
    }
}

/// Per-session RNG: stream `n` of the experiment seed, so a session's draws
/// do not depend on how many other sessions exist or in what order they ran.
pub fn session_rng(seed: u64, n: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(n);
    rng
}

pub fn session_id_for(n: u64) -> SessionId {
    SessionId::new(format!("s{n:06}"))
}

/// Shared collaborators of an engine.
#[derive(Clone)]
pub struct EngineParts {
    pub config: ExperimentConfig,
    pub dataset: Arc<Dataset>,
    pub provider: Arc<dyn InterventionProvider>,
    pub reference: Option<Arc<ReferenceTable>>,
    pub clock: Arc<dyn Clock>,
}

/// Per-arm session counts for the live report.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub sessions: usize,
    pub in_progress: usize,
    pub completed: usize,
    pub disqualified: usize,
    pub events: u64,
}

pub struct Engine {
    parts: EngineParts,
    store: EventStore,
    sessions: RwLock<BTreeMap<SessionId, Arc<Mutex<SessionState>>>>,
    next_session: Mutex<u64>,
}

impl Engine {
    /// Open (or create) the log in `dir` and rebuild state by replay.
    pub fn open(dir: &Path, parts: EngineParts) -> Result<Engine, StoreError> {
        let (store, snapshot) = EventStore::open(dir, parts.config.fsync_every)?;
        let mut states: BTreeMap<SessionId, SessionState> = snapshot
            .session_index()
            .into_iter()
            .map(|info| (info.session_id.clone(), SessionState::new(info)))
            .collect();
        for event in &snapshot.events {
            if let Some(state) = states.get_mut(&event.session_id) {
                state.apply(event);
            }
        }
        let next = states
            .keys()
            .filter_map(|id| id.as_str().strip_prefix('s')?.parse::<u64>().ok())
            .max()
            .unwrap_or(0)
            + 1;
        Ok(Engine {
            parts,
            store,
            sessions: RwLock::new(
                states
                    .into_iter()
                    .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
                    .collect(),
            ),
            next_session: Mutex::new(next),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.parts.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.parts.dataset
    }

    pub fn sync(&self) -> Result<(), StoreError> {
        self.store.sync()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("sessions lock").len()
    }

    pub fn live_report(&self) -> BTreeMap<InterventionArm, ArmCounts> {
        let sessions = self.sessions.read().expect("sessions lock");
        let mut out: BTreeMap<InterventionArm, ArmCounts> = BTreeMap::new();
        for s in sessions.values() {
            let s = s.lock().expect("session lock");
            let c = out.entry(s.info.arm).or_default();
            c.sessions += 1;
            match s.info.stage {
                Stage::Done => c.completed += 1,
                Stage::Disqualified => c.disqualified += 1,
                _ => c.in_progress += 1,
            }
            c.events += s.ledger.next_seq();
        }
        out
    }

    fn get(&self, id: &SessionId) -> Result<Arc<Mutex<SessionState>>, EngineError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::UnknownSession {
                session_id: id.to_string(),
            })
    }

    fn render_feed(
        &self,
        arm: InterventionArm,
        feed: &[ClaimId],
        attrs: Option<&AttributeSet>,
    ) -> Result<Vec<InterventionText>, EngineError> {
        feed.iter()
            .map(|id| {
                let claim = self.parts.dataset.get(id).expect("feed claims come from the dataset");
                Ok(self.parts.provider.intervention(claim, arm, attrs)?)
            })
            .collect()
    }

    fn set_stage(&self, state: &mut SessionState, stage: Stage) -> Result<(), EngineError> {
        self.store.append_session(&SessionRecord::Stage {
            session_id: state.info.session_id.clone(),
            stage,
            at: self.parts.clock.now_ms(),
        })?;
        state.info.stage = stage;
        Ok(())
    }

    fn record(&self, state: &mut SessionState, input: &EventInput) -> Result<u64, EngineError> {
        let event = InteractionEvent {
            seq: state.ledger.next_seq(),
            session_id: state.info.session_id.clone(),
            claim_id: input.claim_id.clone(),
            timestamp: self.parts.clock.now_ms(),
            kind: input.kind,
            phase: input.phase,
            payload: input.payload.clone(),
        };
        validate_event(&event, &state.ledger)?;
        self.store.append_event(&event)?;
        state.apply(&event);
        Ok(event.seq)
    }

    fn view(&self, s: &SessionState) -> SessionView {
        SessionView {
            session_id: s.info.session_id.clone(),
            user_id: s.info.user_id.clone(),
            arm: s.info.arm,
            stage: s.info.stage,
            feed: s.info.feed.clone(),
            feed_size: self.parts.config.feed_size,
            min_interactions: self.parts.config.min_interactions,
        }
    }
}

impl ExperimentApi for Engine {
    fn create_session(&self, req: &CreateSessionRequest) -> Result<SessionView, EngineError> {
        let mut next = self.next_session.lock().expect("counter lock");
        let n = *next;
        let cfg = &self.parts.config;
        let mut rng = session_rng(cfg.seed, n);
        let arm = match cfg.assignment {
            Assignment::Random => assign_arm(cfg, &mut rng),
            Assignment::Blocked => assign_arm_blocked(cfg, n),
        };
        let feed = sample_feed(&self.parts.dataset, cfg, &mut rng)?;
        let items = match arm {
            InterventionArm::Control | InterventionArm::LlmPersonalized => Vec::new(),
            _ => self.render_feed(arm, &feed, None)?,
        };
        let session_id = session_id_for(n);
        let user_id = req
            .user_id
            .clone()
            .unwrap_or_else(|| UserId::new(format!("u{n:06}")));
        let created_at = self.parts.clock.now_ms();
        self.store.append_session(&SessionRecord::Created {
            session_id: session_id.clone(),
            user_id: user_id.clone(),
            arm,
            feed: feed.clone(),
            trial: cfg.trial,
            created_at,
        })?;
        if !items.is_empty() {
            self.store.append_session(&SessionRecord::Interventions {
                session_id: session_id.clone(),
                items: items.clone(),
            })?;
        }
        *next += 1;
        let mut info = SessionInfo {
            session_id: session_id.clone(),
            user_id,
            arm,
            feed,
            trial: cfg.trial,
            created_at,
            stage: Stage::Consent,
            self_reported: None,
            inferred: None,
            survey_answers: Vec::new(),
            attention_passed: None,
            interventions: BTreeMap::new(),
        };
        for t in items {
            info.interventions.insert(t.claim_id.clone(), t);
        }
        let state = SessionState::new(info);
        let view = self.view(&state);
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(session_id, Arc::new(Mutex::new(state)));
        Ok(view)
    }

    fn session(&self, id: &SessionId) -> Result<SessionView, EngineError> {
        let s = self.get(id)?;
        let s = s.lock().expect("session lock");
        Ok(self.view(&s))
    }

    fn feed(&self, id: &SessionId) -> Result<FeedView, EngineError> {
        let s = self.get(id)?;
        let s = s.lock().expect("session lock");
        let posts = s
            .info
            .feed
            .iter()
            .map(|cid| {
                let claim = self.parts.dataset.get(cid).expect("feed claims come from the dataset");
                let r = s.reactions.get(cid);
                let has = |k| r.is_some_and(|set| set.contains(&k));
                FeedPost {
                    claim_id: cid.clone(),
                    headline: claim.headline.clone(),
                    source: claim.source.clone(),
                    image_ref: claim.image_ref.clone(),
                    liked: has(EventKind::Like),
                    shared: has(EventKind::Share),
                    flagged: has(EventKind::Flag),
                    opened: s.ledger.opened.contains(cid),
                }
            })
            .collect();
        let done = s.ledger.interacted.len();
        Ok(FeedView {
            session_id: id.clone(),
            stage: s.info.stage,
            posts,
            interactions_done: done,
            min_interactions: self.parts.config.min_interactions,
            can_submit: s.info.stage == Stage::Feed && done >= self.parts.config.min_interactions,
        })
    }

    fn advance(&self, id: &SessionId) -> Result<SessionView, EngineError> {
        let s = self.get(id)?;
        let mut s = s.lock().expect("session lock");
        let next = match s.info.stage {
            Stage::Consent => Stage::Instructions,
            Stage::Instructions => Stage::Questionnaire,
            actual if actual.is_closed() => return Err(EngineError::SessionClosed { stage: actual }),
            actual => {
                return Err(EngineError::WrongStage {
                    expected: Stage::Instructions,
                    actual,
                })
            }
        };
        self.set_stage(&mut s, next)?;
        Ok(self.view(&s))
    }

    fn submit_questionnaire(
        &self,
        id: &SessionId,
        form: &QuestionnaireSubmission,
    ) -> Result<QuestionnaireOutcome, EngineError> {
        let s = self.get(id)?;
        let mut s = s.lock().expect("session lock");
        s.require_stage(Stage::Questionnaire)?;
        let passed = check_attention(&form.attention, &self.parts.config);

        let inferred = match (&self.parts.reference, passed) {
            (Some(table), true) if !form.survey_answers.is_empty() => Some(
                infer_attributes(&form.survey_answers, table, self.parts.config.prior)
                    .map_err(|e| EngineError::invalid(e.to_string()))?
                    .attributes,
            ),
            _ => None,
        };
        let items = if passed && s.info.arm == InterventionArm::LlmPersonalized {
            // without a reference table, fall back to the self-reported profile
            let attrs = inferred.clone().unwrap_or_else(|| form.self_reported.clone());
            let feed = s.info.feed.clone();
            self.render_feed(s.info.arm, &feed, Some(&attrs))?
        } else {
            Vec::new()
        };

        for a in &form.survey_answers {
            self.record(
                &mut s,
                &EventInput {
                    claim_id: None,
                    kind: EventKind::QuestionnaireAnswer,
                    phase: Phase::Pre,
                    payload: Payload::answer(&a.question_id, &a.answer_id),
                },
            )?;
        }
        for (q, v) in [
            ("min_interactions", &form.attention.min_interactions),
            ("feed_size", &form.attention.feed_size),
        ] {
            let text = match v {
                AnswerValue::Number(x) => x.to_string(),
                AnswerValue::Text(t) => t.clone(),
            };
            self.record(
                &mut s,
                &EventInput {
                    claim_id: None,
                    kind: EventKind::AttentionCheckAnswer,
                    phase: Phase::Pre,
                    payload: Payload::answer(q, text),
                },
            )?;
        }
        self.store.append_session(&SessionRecord::Profile {
            session_id: id.clone(),
            self_reported: form.self_reported.clone(),
            inferred: inferred.clone(),
            survey_answers: form.survey_answers.clone(),
            attention_passed: passed,
        })?;
        s.info.self_reported = Some(form.self_reported.clone());
        s.info.inferred = inferred;
        s.info.survey_answers = form.survey_answers.clone();
        s.info.attention_passed = Some(passed);
        if !items.is_empty() {
            self.store.append_session(&SessionRecord::Interventions {
                session_id: id.clone(),
                items: items.clone(),
            })?;
            for t in items {
                s.info.interventions.insert(t.claim_id.clone(), t);
            }
        }
        let stage = if passed { Stage::Feed } else { Stage::Disqualified };
        self.set_stage(&mut s, stage)?;
        Ok(QuestionnaireOutcome { passed, stage })
    }

    fn post_event(&self, id: &SessionId, event: &EventInput) -> Result<EventAck, EngineError> {
        let s = self.get(id)?;
        let mut s = s.lock().expect("session lock");
        s.require_stage(Stage::Feed)?;
        match event.kind {
            EventKind::QuestionnaireAnswer | EventKind::AttentionCheckAnswer => {
                return Err(EngineError::invalid("questionnaire answers go to /questionnaire"))
            }
            EventKind::OpenIntervention => {
                return Err(EngineError::invalid("interventions are opened through step1"))
            }
            EventKind::HelpfulnessRating if s.info.arm == InterventionArm::Control => {
                return Err(EngineError::PhaseViolation {
                    claim: event.claim_id.as_ref().map(|c| c.to_string()).unwrap_or_default(),
                    reason: "the control arm shows no intervention to rate".into(),
                })
            }
            _ => {}
        }
        let seq = self.record(&mut s, event)?;
        Ok(EventAck { seq })
    }

    fn step1(&self, id: &SessionId, claim: &ClaimId) -> Result<Step1View, EngineError> {
        let s = self.get(id)?;
        let mut s = s.lock().expect("session lock");
        s.require_stage(Stage::Feed)?;
        s.require_claim(claim)?;
        // reopening logs nothing new
        if !s.ledger.opened.contains(claim) {
            self.record(
                &mut s,
                &EventInput::reaction(claim, EventKind::OpenIntervention, Phase::Pre),
            )?;
        }
        let c = self.parts.dataset.get(claim).expect("feed claims come from the dataset");
        Ok(Step1View {
            claim_id: claim.clone(),
            headline: c.headline.clone(),
            question: RELIABILITY_QUESTION.into(),
            options: Judgment::ALL.to_vec(),
        })
    }

    fn step2(&self, id: &SessionId, claim: &ClaimId) -> Result<Step2View, EngineError> {
        let s = self.get(id)?;
        let s = s.lock().expect("session lock");
        s.require_stage(Stage::Feed)?;
        s.require_claim(claim)?;
        let violation = |reason: &str| EngineError::PhaseViolation {
            claim: claim.to_string(),
            reason: reason.into(),
        };
        if !s.ledger.opened.contains(claim) {
            return Err(violation("step 1 has not been shown"));
        }
        if !s.ledger.pre_judged.contains(claim) {
            return Err(violation("the reliability question has not been answered"));
        }
        let arm = s.info.arm;
        let (label, explanation, audience) = if arm.reveals_content() {
            let text = s.info.interventions.get(claim).ok_or_else(|| EngineError::Generation {
                message: format!("no intervention prepared for claim `{claim}`"),
            })?;
            let explanation = (!text.explanation.is_empty()).then(|| text.explanation.clone());
            (Some(text.label_shown), explanation, text.generation_attrs.clone())
        } else {
            (None, None, None)
        };
        Ok(Step2View {
            claim_id: claim.clone(),
            arm,
            label,
            explanation,
            audience,
            question: RELIABILITY_QUESTION.into(),
            rate_helpfulness: arm.reveals_content(),
            helpfulness_scale: if arm.reveals_content() {
                Helpfulness::LABELS.iter().map(|s| s.to_string()).collect()
            } else {
                Vec::new()
            },
        })
    }

    fn submit(&self, id: &SessionId) -> Result<SubmitOutcome, EngineError> {
        let s = self.get(id)?;
        let mut s = s.lock().expect("session lock");
        s.require_stage(Stage::Feed)?;
        let done = s.ledger.interacted.len();
        let required = self.parts.config.min_interactions;
        let accepted = done >= required;
        if accepted {
            self.set_stage(&mut s, Stage::Done)?;
        }
        Ok(SubmitOutcome {
            accepted,
            interacted_claims: done,
            required,
            stage: s.info.stage,
        })
    }
}
