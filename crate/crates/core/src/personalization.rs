//! Demographic inference from survey answers, and alignment scoring of a
//! personalized explanation against a participant's self-reported profile.
//!
//! Inference picks the group maximizing `prior(g) * prod P(answer | g, question)`,
//! accumulated in log space. Exact ties go to the lexicographically smaller
//! group key.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{AttributeKind, AttributeSet, SurveyAnswer, UserProfile};

const SUM_TOLERANCE: f64 = 1e-9;
// two log-scores closer than this are treated as an exact tie
const TIE_EPSILON: f64 = 1e-9;

pub const DEFAULT_ALIGNMENT_THRESHOLD: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PersonalizationError {
    #[error("no survey answers to infer from")]
    EmptyAnswers,
    #[error("malformed reference table: {0}")]
    MalformedTable(String),
    #[error("every group assigns zero probability to these answers")]
    ZeroLikelihood,
    #[error("alignment needs at least one generation attribute")]
    EmptyAttributes,
}

type Result<T> = std::result::Result<T, PersonalizationError>;

/// On-disk form of a reference table.
///
/// Each question lists, per group key, either answer probabilities or raw
/// answer counts. Counts are Laplace-smoothed (alpha = 1) over the
/// question's answer vocabulary when loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTableFile {
    pub groups: Vec<AttributeSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<BTreeMap<String, f64>>,
    pub questions: BTreeMap<String, QuestionFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionFile {
    pub answers: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub probabilities: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counts: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq)]
struct Row {
    probs: HashMap<String, f64>,
    // number of observations behind the row, when built from counts
    observations: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
struct Question {
    vocab: Vec<String>,
    rows: Vec<Option<Row>>,
}

/// Validated, read-only reference table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    groups: Vec<AttributeSet>,
    keys: Vec<String>,
    prior: Vec<f64>,
    has_explicit_prior: bool,
    questions: BTreeMap<String, Question>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    #[default]
    Uniform,
    Table,
}

impl ReferenceTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ReferenceTableFile = serde_json::from_str(text)
            .map_err(|e| PersonalizationError::MalformedTable(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: ReferenceTableFile) -> Result<Self> {
        let bad = |m: String| PersonalizationError::MalformedTable(m);
        if file.groups.is_empty() {
            return Err(bad("no groups".into()));
        }
        let mut groups = file.groups;
        groups.sort_by_key(AttributeSet::key);
        let keys: Vec<String> = groups.iter().map(AttributeSet::key).collect();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("duplicate group".into()));
        }
        if groups.iter().any(AttributeSet::is_empty) {
            return Err(bad("group with no attributes".into()));
        }
        let index: HashMap<&str, usize> =
            keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
        let lookup = |key: &str| -> Result<usize> {
            let canonical = AttributeSet::parse(key)
                .map(|a| a.key())
                .unwrap_or_else(|_| key.to_string());
            index
                .get(canonical.as_str())
                .copied()
                .ok_or_else(|| bad(format!("unknown group `{key}`")))
        };

        let n = groups.len();
        let (prior, has_explicit_prior) = match &file.prior {
            None => (vec![1.0 / n as f64; n], false),
            Some(map) => {
                let mut prior = vec![0.0; n];
                for (k, &p) in map {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(bad(format!("prior for `{k}` out of range")));
                    }
                    prior[lookup(k)?] = p;
                }
                let total: f64 = prior.iter().sum();
                if (total - 1.0).abs() > SUM_TOLERANCE {
                    return Err(bad(format!("priors sum to {total}")));
                }
                (prior, true)
            }
        };

        let mut questions = BTreeMap::new();
        for (qid, q) in file.questions {
            if q.answers.is_empty() {
                return Err(bad(format!("question `{qid}` has no answers")));
            }
            let mut rows: Vec<Option<Row>> = vec![None; n];
            for (gkey, probs) in &q.probabilities {
                let g = lookup(gkey)?;
                for (a, &p) in probs {
                    if !q.answers.contains(a) {
                        return Err(bad(format!("question `{qid}`: unknown answer `{a}`")));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(bad(format!("question `{qid}`: probability {p} out of range")));
                    }
                }
                let total: f64 = probs.values().sum();
                if (total - 1.0).abs() > SUM_TOLERANCE {
                    return Err(bad(format!(
                        "question `{qid}`, group `{gkey}`: probabilities sum to {total}"
                    )));
                }
                rows[g] = Some(Row {
                    probs: probs.iter().map(|(a, p)| (a.clone(), *p)).collect(),
                    observations: None,
                });
            }
            for (gkey, counts) in &q.counts {
                let g = lookup(gkey)?;
                if rows[g].is_some() {
                    return Err(bad(format!(
                        "question `{qid}`, group `{gkey}`: both counts and probabilities"
                    )));
                }
                if counts.values().any(|&c| c < 0.0) {
                    return Err(bad(format!("question `{qid}`: negative count")));
                }
                let total: f64 = counts.values().sum();
                let v = q.answers.len() as f64;
                let probs = q
                    .answers
                    .iter()
                    .map(|a| {
                        let c = counts.get(a).copied().unwrap_or(0.0);
                        (a.clone(), (c + 1.0) / (total + v))
                    })
                    .collect();
                rows[g] = Some(Row {
                    probs,
                    observations: Some(total),
                });
            }
            questions.insert(
                qid,
                Question {
                    vocab: q.answers,
                    rows,
                },
            );
        }

        Ok(ReferenceTable {
            groups,
            keys,
            prior,
            has_explicit_prior,
            questions,
        })
    }

    pub fn groups(&self) -> &[AttributeSet] {
        &self.groups
    }

    pub fn group_keys(&self) -> &[String] {
        &self.keys
    }

    pub fn questions(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.questions
            .iter()
            .map(|(q, question)| (q.as_str(), question.vocab.as_slice()))
    }

    /// Smoothed P(answer | group, question), or `None` when the answer
    /// carries no information (unknown question, or an answer outside the
    /// vocabulary of a probability table).
    pub fn probability(&self, group: usize, question: &str, answer: &str) -> Option<f64> {
        let q = self.questions.get(question)?;
        let v = q.vocab.len() as f64;
        match &q.rows[group] {
            None => {
                // no observations for this group: Laplace over the vocabulary
                let extra = if q.vocab.iter().any(|a| a == answer) { 0.0 } else { 1.0 };
                Some(1.0 / (v + extra))
            }
            Some(row) => match row.probs.get(answer) {
                Some(&p) => Some(p),
                None if q.vocab.iter().any(|a| a == answer) => Some(0.0),
                None => row.observations.map(|n| 1.0 / (n + v + 1.0)),
            },
        }
    }

    fn prior_for(&self, mode: PriorMode) -> Vec<f64> {
        match mode {
            PriorMode::Table if self.has_explicit_prior => self.prior.clone(),
            _ => vec![1.0 / self.groups.len() as f64; self.groups.len()],
        }
    }

    /// Unnormalized log posterior per group, in group-key order.
    pub fn log_scores(&self, answers: &[SurveyAnswer], mode: PriorMode) -> Vec<f64> {
        let prior = self.prior_for(mode);
        (0..self.groups.len())
            .map(|g| {
                let mut s = prior[g].ln();
                for a in answers {
                    let unseen_everywhere = (0..self.groups.len())
                        .all(|h| self.probability(h, &a.question_id, &a.answer_id).is_none());
                    if unseen_everywhere {
                        continue;
                    }
                    if let Some(p) = self.probability(g, &a.question_id, &a.answer_id) {
                        s += p.ln();
                    }
                }
                s
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    pub attributes: AttributeSet,
    pub group_key: String,
    /// Normalized posterior per group key.
    pub posterior: Vec<(String, f64)>,
}

pub fn infer_attributes(
    answers: &[SurveyAnswer],
    table: &ReferenceTable,
    mode: PriorMode,
) -> Result<Inference> {
    if answers.is_empty() {
        return Err(PersonalizationError::EmptyAnswers);
    }
    let scores = table.log_scores(answers, mode);
    let best_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best_score == f64::NEG_INFINITY {
        return Err(PersonalizationError::ZeroLikelihood);
    }
    // keys are sorted, so the first index within the tie band is the smallest key
    let best = scores
        .iter()
        .position(|&s| s >= best_score - TIE_EPSILON)
        .expect("a finite maximum exists");
    let weights: Vec<f64> = scores.iter().map(|s| (s - best_score).exp()).collect();
    let total: f64 = weights.iter().sum();
    let posterior = table
        .keys
        .iter()
        .zip(weights)
        .map(|(k, w)| (k.clone(), w / total))
        .collect();
    Ok(Inference {
        attributes: table.groups[best].clone(),
        group_key: table.keys[best].clone(),
        posterior,
    })
}

/// Fraction of generation attributes equal to the user's self-reported values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentScore {
    pub matches: usize,
    pub k_used: usize,
}

impl AlignmentScore {
    pub fn value(self) -> f64 {
        self.matches as f64 / self.k_used as f64
    }

    pub fn classify(self, threshold: f64) -> Alignment {
        classify_alignment(self.value(), threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Aligned,
    Misaligned,
}

pub fn alignment_score(user: &UserProfile, generation_attrs: &AttributeSet) -> Result<AlignmentScore> {
    alignment_between(&user.self_reported, generation_attrs)
}

pub fn alignment_between(
    self_reported: &AttributeSet,
    generation_attrs: &AttributeSet,
) -> Result<AlignmentScore> {
    let used = generation_attrs.values();
    if used.is_empty() {
        return Err(PersonalizationError::EmptyAttributes);
    }
    let matches = used
        .iter()
        .filter(|(kind, value)| self_reported.get(*kind).as_deref() == Some(value.as_str()))
        .count();
    Ok(AlignmentScore {
        matches,
        k_used: used.len(),
    })
}

pub fn classify_alignment(score: f64, threshold: f64) -> Alignment {
    // 2/5 and 0.4 can differ in the last bit depending on how they were produced
    if score + 1e-12 >= threshold {
        Alignment::Aligned
    } else {
        Alignment::Misaligned
    }
}

/// Which attribute kinds a set defines, for diagnostics.
pub fn used_kinds(attrs: &AttributeSet) -> Vec<AttributeKind> {
    attrs.values().into_iter().map(|(k, _)| k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_group_table() -> ReferenceTable {
        ReferenceTable::from_json(
            r#"{
            "groups": [{"politics": "liberal"}, {"politics": "conservative"}],
            "questions": {
                "q1": {"answers": ["a", "b"],
                       "probabilities": {"politics=liberal": {"a": 0.9, "b": 0.1},
                                         "politics=conservative": {"a": 0.1, "b": 0.9}}}
            }}"#,
        )
        .unwrap()
    }

    #[test]
    fn single_factor_argmax() {
        let t = two_group_table();
        let inf = infer_attributes(&[SurveyAnswer::new("q1", "a")], &t, PriorMode::Uniform).unwrap();
        assert_eq!(inf.group_key, "politics=liberal");
        let p: f64 = inf.posterior.iter().map(|(_, p)| p).sum();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_tie_goes_to_smaller_key() {
        let t = two_group_table();
        // an unknown question is uninformative, so both groups tie
        let inf = infer_attributes(&[SurveyAnswer::new("q9", "x")], &t, PriorMode::Uniform).unwrap();
        assert_eq!(inf.group_key, "politics=conservative");
    }

    #[test]
    fn empty_answers_rejected() {
        assert_eq!(
            infer_attributes(&[], &two_group_table(), PriorMode::Uniform),
            Err(PersonalizationError::EmptyAnswers)
        );
    }

    #[test]
    fn malformed_tables_rejected() {
        let rows_off = r#"{"groups":[{"politics":"liberal"}],
            "questions":{"q":{"answers":["a","b"],"probabilities":{"politics=liberal":{"a":0.5,"b":0.4}}}}}"#;
        assert!(matches!(
            ReferenceTable::from_json(rows_off),
            Err(PersonalizationError::MalformedTable(_))
        ));
        let prior_off = r#"{"groups":[{"politics":"liberal"},{"politics":"moderate"}],
            "prior":{"politics=liberal":0.7,"politics=moderate":0.2},"questions":{}}"#;
        assert!(ReferenceTable::from_json(prior_off).is_err());
        let unknown_group = r#"{"groups":[{"politics":"liberal"}],
            "questions":{"q":{"answers":["a"],"probabilities":{"politics=moderate":{"a":1.0}}}}}"#;
        assert!(ReferenceTable::from_json(unknown_group).is_err());
    }

    #[test]
    fn counts_are_laplace_smoothed() {
        let t = ReferenceTable::from_json(
            r#"{"groups":[{"gender":"male"},{"gender":"female"}],
            "questions":{"q":{"answers":["a","b","c"],
              "counts":{"gender=male":{"a":7,"b":0},"gender=female":{"b":2}}}}}"#,
        )
        .unwrap();
        // male: (7+1)/(7+3), female: (0+1)/(2+3)
        assert!((t.probability(1, "q", "a").unwrap() - 0.8).abs() < 1e-12);
        assert!((t.probability(0, "q", "a").unwrap() - 0.2).abs() < 1e-12);
        // answer outside the vocabulary: 1 / (n + |V| + 1)
        assert!((t.probability(1, "q", "zz").unwrap() - 1.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn table_prior_is_opt_in() {
        let t = ReferenceTable::from_json(
            r#"{"groups":[{"politics":"liberal"},{"politics":"conservative"}],
            "prior":{"politics=liberal":0.95,"politics=conservative":0.05},
            "questions":{"q1":{"answers":["a","b"],
               "probabilities":{"politics=liberal":{"a":0.2,"b":0.8},
                                "politics=conservative":{"a":0.8,"b":0.2}}}}}"#,
        )
        .unwrap();
        let ans = [SurveyAnswer::new("q1", "a")];
        assert_eq!(
            infer_attributes(&ans, &t, PriorMode::Uniform).unwrap().group_key,
            "politics=conservative"
        );
        assert_eq!(
            infer_attributes(&ans, &t, PriorMode::Table).unwrap().group_key,
            "politics=liberal"
        );
    }

    fn profile(attrs: &str) -> UserProfile {
        UserProfile {
            user_id: "u".into(),
            self_reported: AttributeSet::parse(attrs).unwrap(),
            inferred: None,
            survey_answers: vec![],
        }
    }

    #[test]
    fn alignment_examples() {
        let user = profile("liberal, black, educated, male, 30-49");
        let gen = AttributeSet::parse("conservative, white, uneducated, male, 30-49").unwrap();
        let s = alignment_score(&user, &gen).unwrap();
        assert_eq!((s.matches, s.k_used), (2, 5));
        assert_eq!(s.value(), 0.4);
        let s = alignment_score(&user, &user.self_reported).unwrap();
        assert_eq!(s.value(), 1.0);
        let three = AttributeSet::parse("liberal, uneducated, male").unwrap();
        let s = alignment_score(&user, &three).unwrap();
        assert!((s.value() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            alignment_score(&user, &AttributeSet::default()),
            Err(PersonalizationError::EmptyAttributes)
        );
    }

    #[test]
    fn missing_self_report_counts_as_mismatch() {
        let user = profile("male");
        let gen = AttributeSet::parse("male, liberal").unwrap();
        assert_eq!(alignment_score(&user, &gen).unwrap().matches, 1);
    }

    #[test]
    fn threshold_boundaries() {
        assert_eq!(classify_alignment(0.4, 0.4), Alignment::Aligned);
        assert_eq!(classify_alignment(0.2, 0.4), Alignment::Misaligned);
        assert_eq!(classify_alignment(0.6, 0.4), Alignment::Aligned);
        assert_eq!(classify_alignment(2.0 / 5.0, DEFAULT_ALIGNMENT_THRESHOLD), Alignment::Aligned);
        assert_eq!(classify_alignment(1.0 / 3.0, DEFAULT_ALIGNMENT_THRESHOLD), Alignment::Misaligned);
    }

    fn random_table(probs: &[Vec<f64>]) -> ReferenceTable {
        // probs[g] = weights for answers a0..a2 of a single question
        let groups = ["liberal", "moderate", "conservative"];
        let mut q = String::new();
        for (g, w) in probs.iter().enumerate() {
            let total: f64 = w.iter().sum();
            let row: Vec<String> = w
                .iter()
                .enumerate()
                .map(|(i, x)| format!("\"a{i}\": {}", x / total))
                .collect();
            if g > 0 {
                q.push(',');
            }
            q.push_str(&format!("\"politics={}\": {{{}}}", groups[g], row.join(",")));
        }
        let json = format!(
            r#"{{"groups":[{{"politics":"liberal"}},{{"politics":"moderate"}},{{"politics":"conservative"}}],
            "questions":{{"q":{{"answers":["a0","a1","a2"],"probabilities":{{{q}}}}}}}}}"#
        );
        ReferenceTable::from_json(&json).unwrap()
    }

    proptest! {
        #[test]
        fn scale_invariance(w in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 3), 3),
                            answer in 0usize..3, k in 0.01f64..100.0) {
            let t = random_table(&w);
            let ans = [SurveyAnswer::new("q", format!("a{answer}"))];
            let scores = t.log_scores(&ans, PriorMode::Uniform);
            let scaled: Vec<f64> = scores.iter().map(|s| s + k.ln()).collect();
            let argmax = |v: &[f64]| {
                let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                v.iter().position(|&s| s >= m - TIE_EPSILON).unwrap()
            };
            prop_assert_eq!(argmax(&scores), argmax(&scaled));
        }

        #[test]
        fn raising_observed_answer_never_moves_argmax_away(
            w in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 3), 3),
            answer in 0usize..3, g in 0usize..3, boost in 1.0f64..20.0) {
            let t = random_table(&w);
            let ans = [SurveyAnswer::new("q", format!("a{answer}"))];
            let before = infer_attributes(&ans, &t, PriorMode::Uniform).unwrap();
            let mut w2 = w.clone();
            w2[g][answer] *= boost;
            let t2 = random_table(&w2);
            let after = infer_attributes(&ans, &t2, PriorMode::Uniform).unwrap();
            let gkey = format!("politics={}", ["liberal", "moderate", "conservative"][g]);
            if before.group_key == gkey {
                prop_assert_eq!(after.group_key, gkey);
            }
        }
    }
}
