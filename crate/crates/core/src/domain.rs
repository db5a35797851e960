//! Core vocabulary shared by every other module.
//!
//! Everything here is plain data plus validation. Closed sets (veracity,
//! arm, judgment, helpfulness) reject unknown values when parsed from text
//! or JSON.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("unknown {kind} value `{value}`")]
    UnknownValue { kind: &'static str, value: String },
    #[error("headline must not be empty (claim `{0}`)")]
    EmptyHeadline(String),
    #[error("claim id must not be empty")]
    EmptyClaimId,
    #[error("helpfulness rating must be in 1..=4, got {0}")]
    RatingOutOfRange(u8),
    #[error("invalid age bracket `{0}`")]
    InvalidAgeBracket(String),
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident ($label:literal) { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = DomainError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let s = s.trim();
                $(
                    if s.eq_ignore_ascii_case($text) {
                        return Ok($name::$variant);
                    }
                )+
                Err(DomainError::UnknownValue { kind: $label, value: s.to_string() })
            }
        }
    };
}

string_enum!(
    /// Ground-truth label of a claim. Binary by construction.
    Veracity("veracity") { True => "true", False => "false" }
);

string_enum!(Topic("topic") { Medical => "medical", Political => "political", Other => "other" });

string_enum!(Politics("politics") {
    Conservative => "conservative",
    Moderate => "moderate",
    Liberal => "liberal",
});

string_enum!(Race("race") {
    White => "white",
    Black => "black",
    Asian => "asian",
    Hispanic => "hispanic",
    Other => "other",
});

string_enum!(Education("education") { Educated => "educated", Uneducated => "uneducated" });

string_enum!(Gender("gender") { Male => "male", Female => "female", Other => "other" });

string_enum!(
    /// The experimental conditions a participant can be assigned to.
    InterventionArm("arm") {
        Control => "control",
        LabelOnly => "label_only",
        MethodologyAi => "methodology_ai",
        MethodologyHuman => "methodology_human",
        ReactionFrame => "reaction_frame",
        LlmZeroShot => "llm_zero_shot",
        LlmPersonalized => "llm_personalized",
    }
);

string_enum!(
    /// A participant's reliability judgment. `Uncertain` is stored verbatim;
    /// how it is scored is an analysis option.
    Judgment("judgment") { True => "true", False => "false", Uncertain => "uncertain" }
);

string_enum!(EventKind("event kind") {
    Like => "like",
    Share => "share",
    Flag => "flag",
    OpenIntervention => "open_intervention",
    VeracityJudgment => "veracity_judgment",
    HelpfulnessRating => "helpfulness_rating",
    QuestionnaireAnswer => "questionnaire_answer",
    AttentionCheckAnswer => "attention_check_answer",
});

string_enum!(Phase("phase") { Pre => "pre", Post => "post" });

string_enum!(
    /// Demographic attributes in the order they appear in audience clauses.
    AttributeKind("attribute") {
        Education => "education",
        Gender => "gender",
        Race => "race",
        Age => "age",
        Politics => "politics",
    }
);

impl Veracity {
    pub fn from_bool(value: bool) -> Self {
        if value {
            Veracity::True
        } else {
            Veracity::False
        }
    }

    pub fn is_true(self) -> bool {
        self == Veracity::True
    }

    pub fn negate(self) -> Self {
        Veracity::from_bool(!self.is_true())
    }
}

impl Judgment {
    /// `Some(correct)` for a definite judgment, `None` for `Uncertain`.
    pub fn matches(self, truth: Veracity) -> Option<bool> {
        match self {
            Judgment::True => Some(truth == Veracity::True),
            Judgment::False => Some(truth == Veracity::False),
            Judgment::Uncertain => None,
        }
    }
}

impl From<Veracity> for Judgment {
    fn from(v: Veracity) -> Self {
        match v {
            Veracity::True => Judgment::True,
            Veracity::False => Judgment::False,
        }
    }
}

impl InterventionArm {
    /// Whether the reveal step shows a label and explanation.
    pub fn reveals_content(self) -> bool {
        self != InterventionArm::Control
    }

    pub fn is_llm(self) -> bool {
        matches!(self, InterventionArm::LlmZeroShot | InterventionArm::LlmPersonalized)
    }

    /// Human-readable row name for report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            InterventionArm::Control => "Control",
            InterventionArm::LabelOnly => "Label Only",
            InterventionArm::MethodologyAi => "Methodology (AI)",
            InterventionArm::MethodologyHuman => "Methodology (Human)",
            InterventionArm::ReactionFrame => "Reaction Frame",
            InterventionArm::LlmZeroShot => "LLM (zero-shot)",
            InterventionArm::LlmPersonalized => "LLM (personalized)",
        }
    }
}

macro_rules! id_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

id_newtype!(ClaimId);
id_newtype!(SessionId);
id_newtype!(UserId);

pub const DEFAULT_AGE_BRACKETS: [&str; 4] = ["18-29", "30-49", "50-64", "65+"];

/// An age bracket label such as `18-29` or `65+`.
///
/// Brackets are configurable per experiment, so this is a validated label
/// rather than a closed enum; [`AgeBracket::check_in`] checks membership.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AgeBracket(String);

impl AgeBracket {
    pub fn new(label: impl Into<String>) -> Result<Self, DomainError> {
        let label = label.into();
        let trimmed = label.trim();
        let valid = !trimmed.is_empty()
            && trimmed
                .chars()
                .all(|c| c.is_ascii_digit() || c == '-' || c == '+');
        if valid {
            Ok(AgeBracket(trimmed.to_string()))
        } else {
            Err(DomainError::InvalidAgeBracket(label))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn check_in<S: AsRef<str>>(&self, brackets: &[S]) -> Result<(), DomainError> {
        if brackets.iter().any(|b| b.as_ref() == self.0) {
            Ok(())
        } else {
            Err(DomainError::InvalidAgeBracket(self.0.clone()))
        }
    }
}

impl TryFrom<String> for AgeBracket {
    type Error = DomainError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        AgeBracket::new(value)
    }
}

impl From<AgeBracket> for String {
    fn from(value: AgeBracket) -> Self {
        value.0
    }
}

impl FromStr for AgeBracket {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgeBracket::new(s)
    }
}

impl fmt::Display for AgeBracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Up to five demographic attributes. Each is optional; a set used for
/// personalization must hold at least one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub politics: Option<Politics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub race: Option<Race>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub education: Option<Education>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<AgeBracket>,
}

impl AttributeSet {
    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, kind: AttributeKind) -> Option<String> {
        match kind {
            AttributeKind::Education => self.education.map(|v| v.as_str().to_string()),
            AttributeKind::Gender => self.gender.map(|v| v.as_str().to_string()),
            AttributeKind::Race => self.race.map(|v| v.as_str().to_string()),
            AttributeKind::Age => self.age.as_ref().map(|v| v.as_str().to_string()),
            AttributeKind::Politics => self.politics.map(|v| v.as_str().to_string()),
        }
    }

    /// Present attributes in audience-clause order.
    pub fn values(&self) -> Vec<(AttributeKind, String)> {
        AttributeKind::ALL
            .iter()
            .filter_map(|&kind| self.get(kind).map(|v| (kind, v)))
            .collect()
    }

    /// Canonical key, e.g. `education=uneducated,gender=male,politics=conservative`.
    pub fn key(&self) -> String {
        self.values()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parse a canonical key or a bare comma list of values
    /// (`conservative, uneducated, male`).
    pub fn parse(text: &str) -> Result<Self, DomainError> {
        let mut set = AttributeSet::default();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((key, value)) = part.split_once('=') {
                set.set(key.trim().parse()?, value.trim())?;
            } else {
                set.set_inferred(part)?;
            }
        }
        Ok(set)
    }

    pub fn set(&mut self, kind: AttributeKind, value: &str) -> Result<(), DomainError> {
        match kind {
            AttributeKind::Education => self.education = Some(value.parse()?),
            AttributeKind::Gender => self.gender = Some(value.parse()?),
            AttributeKind::Race => self.race = Some(value.parse()?),
            AttributeKind::Age => self.age = Some(value.parse()?),
            AttributeKind::Politics => self.politics = Some(value.parse()?),
        }
        Ok(())
    }

    // Bare values are unambiguous except `other`, which is read as race.
    fn set_inferred(&mut self, value: &str) -> Result<(), DomainError> {
        if let Ok(v) = value.parse::<Politics>() {
            self.politics = Some(v);
        } else if let Ok(v) = value.parse::<Education>() {
            self.education = Some(v);
        } else if let Ok(v) = value.parse::<Race>() {
            self.race = Some(v);
        } else if let Ok(v) = value.parse::<Gender>() {
            self.gender = Some(v);
        } else {
            self.age = Some(value.parse()?);
        }
        Ok(())
    }
}

impl fmt::Display for AttributeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values: Vec<String> = self.values().into_iter().map(|(_, v)| v).collect();
        write!(f, "[{}]", values.join(", "))
    }
}

/// One news item shown as a feed post.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawClaim")]
pub struct Claim {
    pub id: ClaimId,
    pub headline: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub veracity: Veracity,
    pub topic: Topic,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClaim {
    id: ClaimId,
    headline: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    image_ref: Option<String>,
    veracity: Veracity,
    #[serde(default = "default_topic")]
    topic: Topic,
}

fn default_topic() -> Topic {
    Topic::Other
}

impl TryFrom<RawClaim> for Claim {
    type Error = DomainError;

    fn try_from(raw: RawClaim) -> Result<Self, Self::Error> {
        Claim::new(
            raw.id,
            raw.headline,
            raw.source,
            raw.image_ref,
            raw.veracity,
            raw.topic,
        )
    }
}

impl Claim {
    pub fn new(
        id: ClaimId,
        headline: impl Into<String>,
        source: impl Into<String>,
        image_ref: Option<String>,
        veracity: Veracity,
        topic: Topic,
    ) -> Result<Self, DomainError> {
        let headline = headline.into();
        if id.0.trim().is_empty() {
            return Err(DomainError::EmptyClaimId);
        }
        if headline.trim().is_empty() {
            return Err(DomainError::EmptyHeadline(id.0));
        }
        Ok(Claim {
            id,
            headline,
            source: source.into(),
            image_ref: image_ref.filter(|r| !r.trim().is_empty()),
            veracity,
            topic,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurveyAnswer {
    pub question_id: String,
    pub answer_id: String,
}

impl SurveyAnswer {
    pub fn new(question_id: impl Into<String>, answer_id: impl Into<String>) -> Self {
        SurveyAnswer {
            question_id: question_id.into(),
            answer_id: answer_id.into(),
        }
    }
}

/// A participant. `self_reported` is ground truth used for scoring only;
/// generation always works from `inferred`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: UserId,
    pub self_reported: AttributeSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inferred: Option<AttributeSet>,
    #[serde(default)]
    pub survey_answers: Vec<SurveyAnswer>,
}

/// Split on Unicode whitespace.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// The content revealed in step two of the pop-up for one claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionText {
    pub claim_id: ClaimId,
    pub arm: InterventionArm,
    pub label_shown: Veracity,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_attrs: Option<AttributeSet>,
    pub word_count: usize,
    #[serde(default)]
    pub over_limit: bool,
}

impl InterventionText {
    pub fn new(
        claim_id: ClaimId,
        arm: InterventionArm,
        label_shown: Veracity,
        explanation: impl Into<String>,
    ) -> Self {
        let explanation = explanation.into();
        InterventionText {
            claim_id,
            arm,
            label_shown,
            word_count: word_count(&explanation),
            explanation,
            generation_attrs: None,
            over_limit: false,
        }
    }
}

/// Four-point helpfulness rating, very unhelpful = 1 through very helpful = 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Helpfulness(u8);

impl Helpfulness {
    pub const LABELS: [&'static str; 4] = [
        "very unhelpful",
        "somewhat unhelpful",
        "somewhat helpful",
        "very helpful",
    ];

    pub fn new(value: u8) -> Result<Self, DomainError> {
        if (1..=4).contains(&value) {
            Ok(Helpfulness(value))
        } else {
            Err(DomainError::RatingOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_helpful(self) -> bool {
        self.0 >= 3
    }

    pub fn label(self) -> &'static str {
        Self::LABELS[usize::from(self.0 - 1)]
    }
}

impl TryFrom<u8> for Helpfulness {
    type Error = DomainError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Helpfulness::new(value)
    }
}

impl From<Helpfulness> for u8 {
    fn from(h: Helpfulness) -> Self {
        h.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentPayload {
    pub judgment: Judgment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingPayload {
    pub rating: Helpfulness,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerPayload {
    pub question_id: String,
    pub answer: String,
}

/// Kind-specific event data. Serialized without a tag; the shapes are disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Judgment(JudgmentPayload),
    Rating(RatingPayload),
    Answer(AnswerPayload),
    None,
}

impl Payload {
    pub fn judgment(judgment: Judgment) -> Self {
        Payload::Judgment(JudgmentPayload { judgment })
    }

    pub fn rating(rating: Helpfulness) -> Self {
        Payload::Rating(RatingPayload { rating })
    }

    pub fn answer(question_id: impl Into<String>, answer: impl Into<String>) -> Self {
        Payload::Answer(AnswerPayload {
            question_id: question_id.into(),
            answer: answer.into(),
        })
    }

    fn fits(&self, kind: EventKind) -> bool {
        match kind {
            EventKind::Like | EventKind::Share | EventKind::Flag | EventKind::OpenIntervention => {
                matches!(self, Payload::None)
            }
            EventKind::VeracityJudgment => matches!(self, Payload::Judgment(_)),
            EventKind::HelpfulnessRating => matches!(self, Payload::Rating(_)),
            EventKind::QuestionnaireAnswer | EventKind::AttentionCheckAnswer => {
                matches!(self, Payload::Answer(_))
            }
        }
    }
}

/// One line of the append-only event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionEvent {
    pub seq: u64,
    pub session_id: SessionId,
    pub claim_id: Option<ClaimId>,
    /// Milliseconds since the Unix epoch, from the engine's injected clock.
    pub timestamp: u64,
    pub kind: EventKind,
    pub phase: Phase,
    pub payload: Payload,
}

impl InteractionEvent {
    pub fn judgment(&self) -> Option<Judgment> {
        match &self.payload {
            Payload::Judgment(p) => Some(p.judgment),
            _ => None,
        }
    }

    pub fn rating(&self) -> Option<Helpfulness> {
        match &self.payload {
            Payload::Rating(p) => Some(p.rating),
            _ => None,
        }
    }

    pub fn answer(&self) -> Option<&AnswerPayload> {
        match &self.payload {
            Payload::Answer(p) => Some(p),
            _ => None,
        }
    }
}

impl EventKind {
    pub fn is_reaction(self) -> bool {
        matches!(self, EventKind::Like | EventKind::Share | EventKind::Flag)
    }

    pub fn needs_claim(self) -> bool {
        !matches!(
            self,
            EventKind::QuestionnaireAnswer | EventKind::AttentionCheckAnswer
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum EventRejection {
    #[error("event seq {got} is not after {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("phase violation on claim `{claim}`: {reason}")]
    PhaseViolation { claim: String, reason: String },
    #[error("claim `{claim}` is not in this session's feed")]
    UnknownClaim { claim: String },
    #[error("event belongs to session `{got}`, not `{expected}`")]
    SessionMismatch { expected: String, got: String },
    #[error("payload does not fit a `{kind}` event")]
    MalformedPayload { kind: String },
}

/// The per-session facts needed to validate the next event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionLedger {
    pub session_id: SessionId,
    pub feed: Vec<ClaimId>,
    pub last_seq: Option<u64>,
    pub opened: BTreeSet<ClaimId>,
    pub pre_judged: BTreeSet<ClaimId>,
    pub post_judged: BTreeSet<ClaimId>,
    pub interacted: BTreeSet<ClaimId>,
}

impl SessionLedger {
    pub fn new(session_id: SessionId, feed: Vec<ClaimId>) -> Self {
        SessionLedger {
            session_id,
            feed,
            ..Default::default()
        }
    }

    pub fn next_seq(&self) -> u64 {
        self.last_seq.map_or(0, |s| s + 1)
    }

    pub fn in_feed(&self, claim: &ClaimId) -> bool {
        self.feed.contains(claim)
    }

    /// Record an event already accepted by [`validate_event`].
    pub fn apply(&mut self, event: &InteractionEvent) {
        self.last_seq = Some(event.seq);
        let Some(claim) = event.claim_id.clone() else {
            return;
        };
        match (event.kind, event.phase) {
            (EventKind::OpenIntervention, _) => {
                self.opened.insert(claim);
            }
            (EventKind::VeracityJudgment, Phase::Pre) => {
                self.pre_judged.insert(claim);
            }
            (EventKind::VeracityJudgment, Phase::Post) => {
                self.post_judged.insert(claim);
            }
            (kind, _) if kind.is_reaction() => {
                self.interacted.insert(claim);
            }
            _ => {}
        }
    }
}

/// Check an event against the session's history.
pub fn validate_event(
    event: &InteractionEvent,
    ledger: &SessionLedger,
) -> Result<(), EventRejection> {
    if event.session_id != ledger.session_id {
        return Err(EventRejection::SessionMismatch {
            expected: ledger.session_id.to_string(),
            got: event.session_id.to_string(),
        });
    }
    if let Some(last) = ledger.last_seq {
        if event.seq <= last {
            return Err(EventRejection::OutOfOrder {
                last,
                got: event.seq,
            });
        }
    }
    if !event.payload.fits(event.kind) {
        return Err(EventRejection::MalformedPayload {
            kind: event.kind.to_string(),
        });
    }

    if !event.kind.needs_claim() {
        if event.phase == Phase::Post {
            return Err(EventRejection::PhaseViolation {
                claim: String::new(),
                reason: "questionnaire events belong to the pre phase".into(),
            });
        }
        return Ok(());
    }

    let claim = match &event.claim_id {
        Some(c) if ledger.in_feed(c) => c,
        Some(c) => {
            return Err(EventRejection::UnknownClaim {
                claim: c.to_string(),
            })
        }
        None => {
            return Err(EventRejection::UnknownClaim {
                claim: String::new(),
            })
        }
    };
    let violation = |reason: &str| EventRejection::PhaseViolation {
        claim: claim.to_string(),
        reason: reason.to_string(),
    };

    match (event.kind, event.phase) {
        (EventKind::OpenIntervention, Phase::Post) => {
            Err(violation("opening the intervention is a pre-phase event"))
        }
        (EventKind::HelpfulnessRating, Phase::Pre) => {
            Err(violation("helpfulness is rated after the reveal"))
        }
        (_, Phase::Post) if !ledger.opened.contains(claim) => {
            Err(violation("no open_intervention recorded for this claim"))
        }
        (_, Phase::Post) if !ledger.pre_judged.contains(claim) => {
            Err(violation("no pre-phase judgment recorded for this claim"))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ledger() -> SessionLedger {
        SessionLedger::new(SessionId::from("s1"), vec!["c1".into(), "c2".into()])
    }

    fn event(seq: u64, claim: &str, kind: EventKind, phase: Phase, payload: Payload) -> InteractionEvent {
        InteractionEvent {
            seq,
            session_id: "s1".into(),
            claim_id: Some(claim.into()),
            timestamp: 0,
            kind,
            phase,
            payload,
        }
    }

    #[test]
    fn post_judgment_without_open_is_rejected() {
        let e = event(
            0,
            "c1",
            EventKind::VeracityJudgment,
            Phase::Post,
            Payload::judgment(Judgment::False),
        );
        assert!(matches!(
            validate_event(&e, &ledger()),
            Err(EventRejection::PhaseViolation { .. })
        ));
    }

    #[test]
    fn like_with_next_seq_is_accepted() {
        let mut l = ledger();
        let first = event(0, "c1", EventKind::Like, Phase::Pre, Payload::None);
        validate_event(&first, &l).unwrap();
        l.apply(&first);
        let next = event(l.next_seq(), "c2", EventKind::Like, Phase::Pre, Payload::None);
        assert_eq!(validate_event(&next, &l), Ok(()));
    }

    #[test]
    fn repeated_seq_is_out_of_order() {
        let mut l = ledger();
        let first = event(4, "c1", EventKind::Share, Phase::Pre, Payload::None);
        l.apply(&first);
        let again = event(4, "c2", EventKind::Like, Phase::Pre, Payload::None);
        assert_eq!(
            validate_event(&again, &l),
            Err(EventRejection::OutOfOrder { last: 4, got: 4 })
        );
    }

    #[test]
    fn claim_outside_feed_is_unknown() {
        let e = event(0, "zzz", EventKind::Flag, Phase::Pre, Payload::None);
        assert!(matches!(
            validate_event(&e, &ledger()),
            Err(EventRejection::UnknownClaim { .. })
        ));
    }

    #[test]
    fn post_needs_open_and_pre_judgment() {
        let mut l = ledger();
        let open = event(0, "c1", EventKind::OpenIntervention, Phase::Pre, Payload::None);
        l.apply(&open);
        let post = event(
            1,
            "c1",
            EventKind::VeracityJudgment,
            Phase::Post,
            Payload::judgment(Judgment::True),
        );
        assert!(validate_event(&post, &l).is_err());
        let pre = event(
            1,
            "c1",
            EventKind::VeracityJudgment,
            Phase::Pre,
            Payload::judgment(Judgment::Uncertain),
        );
        validate_event(&pre, &l).unwrap();
        l.apply(&pre);
        let post = event(
            2,
            "c1",
            EventKind::VeracityJudgment,
            Phase::Post,
            Payload::judgment(Judgment::True),
        );
        assert_eq!(validate_event(&post, &l), Ok(()));
    }

    #[test]
    fn payload_must_match_kind() {
        let e = event(0, "c1", EventKind::Like, Phase::Pre, Payload::judgment(Judgment::True));
        assert!(matches!(
            validate_event(&e, &ledger()),
            Err(EventRejection::MalformedPayload { .. })
        ));
    }

    #[test]
    fn closed_enums_reject_unknown_values() {
        assert!("misleading".parse::<Veracity>().is_err());
        assert!("placebo".parse::<InterventionArm>().is_err());
        assert!("maybe".parse::<Judgment>().is_err());
        assert!(serde_json::from_str::<Veracity>("\"misleading\"").is_err());
        assert!(serde_json::from_str::<Helpfulness>("5").is_err());
        assert!(serde_json::from_str::<Helpfulness>("0").is_err());
        assert_eq!(serde_json::from_str::<Helpfulness>("4").unwrap().value(), 4);
    }

    #[test]
    fn empty_headline_is_rejected() {
        let err = Claim::new("c".into(), "  ", "src", None, Veracity::True, Topic::Other);
        assert_eq!(err, Err(DomainError::EmptyHeadline("c".into())));
        let json = r#"{"id":"c","headline":"","source":"x","veracity":"true","topic":"other"}"#;
        assert!(serde_json::from_str::<Claim>(json).is_err());
    }

    #[test]
    fn attribute_key_and_parse() {
        let attrs = AttributeSet::parse("conservative, uneducated, male").unwrap();
        assert_eq!(attrs.len(), 3);
        assert_eq!(attrs.key(), "education=uneducated,gender=male,politics=conservative");
        assert_eq!(AttributeSet::parse(&attrs.key()).unwrap(), attrs);
        let full = AttributeSet::parse("uneducated, male, white, 18-29, conservative").unwrap();
        assert_eq!(full.to_string(), "[uneducated, male, white, 18-29, conservative]");
        assert!(AttributeSet::parse("purple").is_err());
    }

    #[test]
    fn age_bracket_membership() {
        let b = AgeBracket::new("65+").unwrap();
        assert!(b.check_in(&DEFAULT_AGE_BRACKETS).is_ok());
        assert!(AgeBracket::new("18-24").unwrap().check_in(&DEFAULT_AGE_BRACKETS).is_err());
        assert!(AgeBracket::new("old").is_err());
    }

    #[test]
    fn event_json_uses_spec_field_names() {
        let e = event(
            7,
            "c1",
            EventKind::HelpfulnessRating,
            Phase::Post,
            Payload::rating(Helpfulness::new(3).unwrap()),
        );
        let json = serde_json::to_value(&e).unwrap();
        for field in ["seq", "session_id", "claim_id", "timestamp", "kind", "phase", "payload"] {
            assert!(json.get(field).is_some(), "missing {field}");
        }
        assert_eq!(json["payload"]["rating"], 3);
        assert_eq!(json["kind"], "helpfulness_rating");
    }
}
