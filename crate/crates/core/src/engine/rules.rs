//! Randomization and participant quality-control rules.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::domain::{ClaimId, InteractionEvent, InterventionArm, Judgment, UserId, Veracity};

use super::config::ExperimentConfig;
use super::EngineError;

pub fn assign_arm<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> InterventionArm {
    let arms = config.arm_list();
    if arms.len() == 1 {
        return arms[0].0;
    }
    let dist = WeightedIndex::new(arms.iter().map(|(_, w)| *w)).expect("weights validated");
    arms[dist.sample(rng)].0
}

/// Arm of session `n` under permuted-block assignment. Sessions are
/// numbered from 1, so sessions 1..=size form the first block.
pub fn assign_arm_blocked(config: &ExperimentConfig, n: u64) -> InterventionArm {
    let i = n.saturating_sub(1);
    let mut block: Vec<InterventionArm> = config
        .arm_list()
        .into_iter()
        .flat_map(|(arm, w)| std::iter::repeat_n(arm, w as usize))
        .collect();
    let size = block.len() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ BLOCK_SALT);
    rng.set_stream(i / size);
    block.shuffle(&mut rng);
    block[(i % size) as usize]
}

const BLOCK_SALT: u64 = 0x626c_6f63_6b73;

/// Distinct claims drawn uniformly without replacement. With
/// `balance_feed`, true and false counts differ by at most one.
pub fn sample_feed<R: Rng + ?Sized>(
    dataset: &Dataset,
    config: &ExperimentConfig,
    rng: &mut R,
) -> Result<Vec<ClaimId>, EngineError> {
    let k = config.feed_size;
    let too_small = |available| EngineError::DatasetTooSmall {
        needed: k,
        available,
    };
    if dataset.len() < k {
        return Err(too_small(dataset.len()));
    }
    if !config.balance_feed {
        let ids: Vec<ClaimId> = dataset
            .claims()
            .choose_multiple(rng, k)
            .map(|c| c.id.clone())
            .collect();
        return Ok(ids);
    }
    let (trues, falses): (Vec<_>, Vec<_>) = dataset
        .claims()
        .iter()
        .partition(|c| c.veracity == Veracity::True);
    // odd feeds get the extra item from a coin flip
    let (mut n_true, mut n_false) = (k / 2, k / 2);
    if k % 2 == 1 {
        if rng.random_bool(0.5) {
            n_true += 1;
        } else {
            n_false += 1;
        }
    }
    if trues.len() < n_true || falses.len() < n_false {
        // the coin flip may be undone if only one side has room
        if k % 2 == 1 && trues.len() >= k / 2 + 1 && falses.len() >= k / 2 {
            (n_true, n_false) = (k / 2 + 1, k / 2);
        } else if k % 2 == 1 && falses.len() >= k / 2 + 1 && trues.len() >= k / 2 {
            (n_true, n_false) = (k / 2, k / 2 + 1);
        } else {
            return Err(too_small(2 * trues.len().min(falses.len()) + usize::from(trues.len() != falses.len())));
        }
    }
    let mut feed: Vec<ClaimId> = trues
        .choose_multiple(rng, n_true)
        .chain(falses.choose_multiple(rng, n_false))
        .map(|c| c.id.clone())
        .collect();
    feed.shuffle(rng);
    Ok(feed)
}

/// A free-form attention answer: a JSON number or a digit string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerValue {
    Number(f64),
    Text(String),
}

impl AnswerValue {
    pub fn normalized(&self) -> Option<i64> {
        let x = match self {
            AnswerValue::Number(x) => *x,
            AnswerValue::Text(s) => s.trim().parse::<f64>().ok()?,
        };
        (x.is_finite() && x.fract() == 0.0).then_some(x as i64)
    }
}

impl From<i64> for AnswerValue {
    fn from(x: i64) -> Self {
        AnswerValue::Number(x as f64)
    }
}

impl From<&str> for AnswerValue {
    fn from(s: &str) -> Self {
        AnswerValue::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttentionAnswers {
    pub min_interactions: AnswerValue,
    pub feed_size: AnswerValue,
}

impl AttentionAnswers {
    pub fn new(min_interactions: impl Into<AnswerValue>, feed_size: impl Into<AnswerValue>) -> Self {
        AttentionAnswers {
            min_interactions: min_interactions.into(),
            feed_size: feed_size.into(),
        }
    }
}

pub fn check_attention(answers: &AttentionAnswers, config: &ExperimentConfig) -> bool {
    let (a, b) = config.attention_answers();
    answers.min_interactions.normalized() == Some(a as i64)
        && answers.feed_size.normalized() == Some(b as i64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub accepted: bool,
    pub interacted_claims: usize,
    pub required: usize,
}

/// Accept iff like/share/flag events cover at least `min_interactions`
/// distinct claims.
pub fn enforce_completion<'a>(
    events: impl IntoIterator<Item = &'a InteractionEvent>,
    config: &ExperimentConfig,
) -> Completion {
    let claims: BTreeSet<&ClaimId> = events
        .into_iter()
        .filter(|e| e.kind.is_reaction())
        .filter_map(|e| e.claim_id.as_ref())
        .collect();
    Completion {
        accepted: claims.len() >= config.min_interactions,
        interacted_claims: claims.len(),
        required: config.min_interactions,
    }
}

/// What the quality-control pass needs to know about one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionOutcome {
    pub user_id: UserId,
    pub completed: bool,
    pub failed_attention: bool,
    pub judgments: Vec<Judgment>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusions {
    pub spammers: BTreeSet<UserId>,
    pub attention_failures: BTreeSet<UserId>,
    pub sub_minimum: BTreeSet<UserId>,
}

impl Exclusions {
    pub fn all(&self) -> BTreeSet<UserId> {
        self.spammers
            .iter()
            .chain(&self.attention_failures)
            .chain(&self.sub_minimum)
            .cloned()
            .collect()
    }

    pub fn contains(&self, user: &UserId) -> bool {
        self.spammers.contains(user)
            || self.attention_failures.contains(user)
            || self.sub_minimum.contains(user)
    }
}

/// Users to drop from analysis:
/// * more than `spam_session_threshold` completed sessions, every
///   judgment the same label;
/// * any failed attention check;
/// * no session that reached the interaction minimum.
pub fn filter_spammers(outcomes: &[SessionOutcome], config: &ExperimentConfig) -> Exclusions {
    let mut by_user: BTreeMap<&UserId, Vec<&SessionOutcome>> = BTreeMap::new();
    for o in outcomes {
        by_user.entry(&o.user_id).or_default().push(o);
    }
    let mut out = Exclusions::default();
    for (user, sessions) in by_user {
        if sessions.iter().any(|s| s.failed_attention) {
            out.attention_failures.insert(user.clone());
        }
        let completed: Vec<_> = sessions.iter().filter(|s| s.completed).collect();
        if completed.is_empty() && !sessions.iter().all(|s| s.failed_attention) {
            out.sub_minimum.insert(user.clone());
        }
        if completed.len() > config.spam_session_threshold {
            let labels: BTreeSet<Judgment> = completed
                .iter()
                .flat_map(|s| s.judgments.iter().copied())
                .collect();
            if labels.len() == 1 {
                out.spammers.insert(user.clone());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Claim, Topic};

    fn dataset(n_true: usize, n_false: usize) -> Dataset {
        let claims = (0..n_true + n_false)
            .map(|i| {
                Claim::new(
                    format!("c{i}").as_str().into(),
                    format!("Headline {i}"),
                    "src",
                    None,
                    Veracity::from_bool(i < n_true),
                    Topic::Other,
                )
                .unwrap()
            })
            .collect();
        Dataset::from_claims(claims).unwrap()
    }

    #[test]
    fn blocks_are_exactly_balanced() {
        let mut cfg = ExperimentConfig::default();
        cfg.assignment = super::super::Assignment::Blocked;
        cfg.arms.insert(InterventionArm::LlmZeroShot, 2.0);
        let size = 6;
        for block in 0..20u64 {
            let mut counts = BTreeMap::new();
            for n in block * size + 1..=(block + 1) * size {
                *counts.entry(assign_arm_blocked(&cfg, n)).or_insert(0) += 1;
            }
            assert_eq!(counts[&InterventionArm::LlmZeroShot], 2);
            assert!(counts.iter().all(|(a, c)| *c == cfg.arms[a] as usize));
        }
    }

    #[test]
    fn single_arm_always_chosen() {
        let mut cfg = ExperimentConfig::default();
        cfg.arms = [(InterventionArm::Control, 1.0)].into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| assign_arm(&cfg, &mut rng) == InterventionArm::Control));
    }

    #[test]
    fn seeded_assignment_repeats() {
        let cfg = ExperimentConfig::default();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            (0..50).map(|_| assign_arm(&cfg, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn balanced_feed() {
        let ds = dataset(188, 185);
        let cfg = ExperimentConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let feed = sample_feed(&ds, &cfg, &mut rng).unwrap();
            let distinct: BTreeSet<_> = feed.iter().collect();
            assert_eq!(distinct.len(), 5);
            let t = feed.iter().filter(|id| ds.get(id).unwrap().veracity.is_true()).count();
            assert!(t == 2 || t == 3);
        }
    }

    #[test]
    fn dataset_too_small() {
        let mut cfg = ExperimentConfig::default();
        cfg.feed_size = 10;
        let err = sample_feed(&dataset(3, 2), &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, EngineError::DatasetTooSmall { needed: 10, .. }));
        cfg.feed_size = 5;
        // five claims but all true cannot be balanced
        assert!(sample_feed(&dataset(5, 0), &cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        cfg.balance_feed = false;
        assert!(sample_feed(&dataset(5, 0), &cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_ok());
    }

    #[test]
    fn tight_balance_uses_whichever_side_fits() {
        let cfg = ExperimentConfig::default();
        for seed in 0..20 {
            let feed = sample_feed(&dataset(3, 2), &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(feed.len(), 5);
        }
    }

    #[test]
    fn attention_answers() {
        let cfg = ExperimentConfig::default();
        assert!(check_attention(&AttentionAnswers::new(3, 5), &cfg));
        assert!(!check_attention(&AttentionAnswers::new(5, 3), &cfg));
        assert!(check_attention(&AttentionAnswers::new("3", " 5 "), &cfg));
        assert!(!check_attention(&AttentionAnswers::new("three", "5"), &cfg));
        assert!(!check_attention(&AttentionAnswers::new("3.5", "5"), &cfg));
    }
}
