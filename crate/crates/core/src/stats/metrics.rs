//! Accuracy, interaction rates and helpfulness over an [`AnalysisFrame`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{InterventionArm, Judgment, Phase, SessionId, UserId};
use crate::personalization::{classify_alignment, Alignment};

use super::bootstrap::{bootstrap_proportion, BootstrapConfig, Estimate};
use super::frame::{AnalysisFrame, JudgmentObs};
use super::regression::{group_means, ols, GroupMeans, RegressionResult};
use super::significance::{mean, significance, Significance};
use super::{StatsError, UncertainMode};

/// Which pre-phase judgments count toward "before" accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreSelection {
    /// Every pre-phase judgment.
    #[default]
    All,
    /// Only claims whose intervention was then revealed (a post judgment exists).
    Revealed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyOptions {
    pub uncertain: UncertainMode,
    pub pre_selection: PreSelection,
    pub bootstrap: BootstrapConfig,
}

impl Default for AccuracyOptions {
    fn default() -> Self {
        AccuracyOptions {
            uncertain: UncertainMode::Incorrect,
            pre_selection: PreSelection::All,
            bootstrap: BootstrapConfig::default(),
        }
    }
}

fn selected<'a>(
    frame: &'a AnalysisFrame,
    arm: InterventionArm,
    phase: Phase,
    opts: &AccuracyOptions,
) -> Vec<&'a JudgmentObs> {
    let revealed = (phase == Phase::Pre && opts.pre_selection == PreSelection::Revealed)
        .then(|| frame.revealed());
    frame
        .judgments
        .iter()
        .filter(|j| j.arm == arm && j.phase == phase)
        .filter(|j| {
            revealed
                .as_ref()
                .is_none_or(|r| r.contains(&(j.session_id.clone(), j.claim_id.clone())))
        })
        .collect()
}

/// Correct and counted judgments under the uncertain rule.
pub fn tally<'a>(obs: impl IntoIterator<Item = &'a JudgmentObs>, mode: UncertainMode) -> (usize, usize) {
    let mut correct = 0;
    let mut total = 0;
    for j in obs {
        match j.judgment.matches(j.veracity) {
            Some(ok) => {
                total += 1;
                correct += usize::from(ok);
            }
            None if mode == UncertainMode::Incorrect => total += 1,
            None => {}
        }
    }
    (correct, total)
}

/// Percentage accuracy with a bootstrap CI.
pub fn accuracy(
    frame: &AnalysisFrame,
    arm: InterventionArm,
    phase: Phase,
    opts: &AccuracyOptions,
) -> Result<Estimate, StatsError> {
    let (correct, total) = tally(selected(frame, arm, phase, opts), opts.uncertain);
    if total == 0 {
        return Err(StatsError::EmptySelection(format!(
            "no {phase} judgments for arm {arm}"
        )));
    }
    Ok(bootstrap_proportion(correct, total, &opts.bootstrap)?.scaled(100.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAccuracy {
    pub trial: u32,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Accuracy per trial plus the two ways of averaging them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialBreakdown {
    pub trials: Vec<TrialAccuracy>,
    /// All interactions pooled, which equals the interaction-weighted mean of trials.
    pub pooled: f64,
    /// Unweighted mean of per-trial accuracies.
    pub mean_of_trials: f64,
}

pub fn accuracy_by_trial(
    frame: &AnalysisFrame,
    arm: InterventionArm,
    phase: Phase,
    opts: &AccuracyOptions,
) -> Result<TrialBreakdown, StatsError> {
    let mut by_trial: BTreeMap<u32, Vec<&JudgmentObs>> = BTreeMap::new();
    for j in selected(frame, arm, phase, opts) {
        by_trial.entry(j.trial).or_default().push(j);
    }
    let trials: Vec<TrialAccuracy> = by_trial
        .into_iter()
        .filter_map(|(trial, obs)| {
            let (correct, total) = tally(obs, opts.uncertain);
            (total > 0).then(|| TrialAccuracy {
                trial,
                correct,
                total,
                accuracy: 100.0 * correct as f64 / total as f64,
            })
        })
        .collect();
    if trials.is_empty() {
        return Err(StatsError::EmptySelection(format!("no {phase} judgments for arm {arm}")));
    }
    let correct: usize = trials.iter().map(|t| t.correct).sum();
    let total: usize = trials.iter().map(|t| t.total).sum();
    let mean_of_trials = trials.iter().map(|t| t.accuracy).sum::<f64>() / trials.len() as f64;
    Ok(TrialBreakdown {
        pooled: 100.0 * correct as f64 / total as f64,
        mean_of_trials,
        trials,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionRates {
    pub false_impressions: usize,
    pub true_impressions: usize,
    pub false_share: f64,
    pub false_flag: f64,
    pub false_like: f64,
    pub true_share: f64,
    pub true_flag: f64,
    pub true_like: f64,
}

fn pct(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * k as f64 / n as f64
    }
}

/// Reaction rates per impression, split by the claim's veracity.
pub fn interaction_rates(
    frame: &AnalysisFrame,
    arm: InterventionArm,
    phase: Phase,
) -> Result<InteractionRates, StatsError> {
    let imps: Vec<_> = frame
        .impressions
        .iter()
        .filter(|i| i.arm == arm && i.phase == phase)
        .collect();
    if imps.is_empty() {
        return Err(StatsError::EmptySelection(format!("no {phase} impressions for arm {arm}")));
    }
    let (fals, tru): (Vec<_>, Vec<_>) = imps.into_iter().partition(|i| !i.veracity.is_true());
    let count = |v: &[&super::frame::Impression], f: fn(&super::frame::Impression) -> bool| {
        v.iter().filter(|i| f(i)).count()
    };
    Ok(InteractionRates {
        false_impressions: fals.len(),
        true_impressions: tru.len(),
        false_share: pct(count(&fals, |i| i.shared), fals.len()),
        false_flag: pct(count(&fals, |i| i.flagged), fals.len()),
        false_like: pct(count(&fals, |i| i.liked), fals.len()),
        true_share: pct(count(&tru, |i| i.shared), tru.len()),
        true_flag: pct(count(&tru, |i| i.flagged), tru.len()),
        true_like: pct(count(&tru, |i| i.liked), tru.len()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelpfulnessSummary {
    /// Share of ratings that are 3 or 4, in percent.
    pub pct_helpful: f64,
    pub mean: f64,
    pub n: usize,
}

pub fn summarize_ratings(ratings: &[u8]) -> Result<HelpfulnessSummary, StatsError> {
    if ratings.is_empty() {
        return Err(StatsError::EmptySelection("no helpfulness ratings".into()));
    }
    let helpful = ratings.iter().filter(|&&r| r >= 3).count();
    Ok(HelpfulnessSummary {
        pct_helpful: pct(helpful, ratings.len()),
        mean: ratings.iter().map(|&r| f64::from(r)).sum::<f64>() / ratings.len() as f64,
        n: ratings.len(),
    })
}

pub fn helpfulness(frame: &AnalysisFrame, arm: InterventionArm) -> Result<HelpfulnessSummary, StatsError> {
    let ratings: Vec<u8> = frame
        .ratings
        .iter()
        .filter(|r| r.arm == arm)
        .map(|r| r.rating.value())
        .collect();
    summarize_ratings(&ratings)
}

/// Helpfulness of personalized explanations split by alignment, against
/// non-personalized LLM explanations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentHelpfulness {
    pub threshold: f64,
    pub aligned: Option<HelpfulnessSummary>,
    pub misaligned: Option<HelpfulnessSummary>,
    pub non_personalized: Option<HelpfulnessSummary>,
    /// Mean helpfulness per exact alignment score, keyed like "0.40".
    pub by_score: BTreeMap<String, HelpfulnessSummary>,
    pub aligned_vs_misaligned: Option<Significance>,
    pub aligned_vs_non_personalized: Option<Significance>,
}

pub fn helpfulness_by_alignment(frame: &AnalysisFrame, threshold: f64) -> AlignmentHelpfulness {
    let mut aligned = Vec::new();
    let mut misaligned = Vec::new();
    let mut by_score: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for r in &frame.ratings {
        if r.arm != InterventionArm::LlmPersonalized {
            continue;
        }
        let Some(score) = r.alignment else { continue };
        by_score
            .entry(format!("{:.2}", score.value()))
            .or_default()
            .push(r.rating.value());
        match classify_alignment(score.value(), threshold) {
            Alignment::Aligned => aligned.push(r.rating.value()),
            Alignment::Misaligned => misaligned.push(r.rating.value()),
        }
    }
    let baseline: Vec<u8> = frame
        .ratings
        .iter()
        .filter(|r| r.arm == InterventionArm::LlmZeroShot)
        .map(|r| r.rating.value())
        .collect();
    let as_f = |v: &[u8]| v.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
    AlignmentHelpfulness {
        threshold,
        aligned: summarize_ratings(&aligned).ok(),
        misaligned: summarize_ratings(&misaligned).ok(),
        non_personalized: summarize_ratings(&baseline).ok(),
        by_score: by_score
            .into_iter()
            .filter_map(|(k, v)| summarize_ratings(&v).ok().map(|s| (k, s)))
            .collect(),
        aligned_vs_misaligned: significance(&as_f(&aligned), &as_f(&misaligned)).ok(),
        aligned_vs_non_personalized: significance(&as_f(&aligned), &as_f(&baseline)).ok(),
    }
}

/// One personalized user's mean alignment and post-phase accuracy (0-1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPoint {
    pub user_id: UserId,
    pub alignment: f64,
    pub accuracy: f64,
}

fn user_accuracy(
    frame: &AnalysisFrame,
    arm: InterventionArm,
    mode: UncertainMode,
) -> BTreeMap<UserId, f64> {
    let mut per_user: BTreeMap<UserId, Vec<&JudgmentObs>> = BTreeMap::new();
    for j in frame.judgments.iter().filter(|j| j.arm == arm && j.phase == Phase::Post) {
        per_user.entry(j.user_id.clone()).or_default().push(j);
    }
    per_user
        .into_iter()
        .filter_map(|(u, obs)| {
            let (c, t) = tally(obs, mode);
            (t > 0).then(|| (u, c as f64 / t as f64))
        })
        .collect()
}

/// (alignment, accuracy) per personalized user.
pub fn alignment_points(frame: &AnalysisFrame, mode: UncertainMode) -> Vec<UserPoint> {
    let acc = user_accuracy(frame, InterventionArm::LlmPersonalized, mode);
    let mut align: BTreeMap<&UserId, Vec<f64>> = BTreeMap::new();
    let mut seen: BTreeSet<&SessionId> = BTreeSet::new();
    for s in frame.sessions.iter().filter(|s| s.arm == InterventionArm::LlmPersonalized) {
        let Some(me) = &s.self_reported else { continue };
        let Some(gen) = s.interventions.values().find_map(|t| t.generation_attrs.as_ref()) else {
            continue;
        };
        if let Ok(score) = crate::personalization::alignment_between(me, gen) {
            if seen.insert(&s.session_id) {
                align.entry(&s.user_id).or_default().push(score.value());
            }
        }
    }
    align
        .into_iter()
        .filter_map(|(u, scores)| {
            acc.get(u).map(|&a| UserPoint {
                user_id: u.clone(),
                alignment: mean(&scores),
                accuracy: a,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentAccuracy {
    pub regression: RegressionResult,
    pub points: Vec<UserPoint>,
    /// Aligned personalized users against non-personalized LLM users.
    pub aligned_vs_non_personalized: Option<GroupMeans>,
}

pub fn alignment_regression(
    frame: &AnalysisFrame,
    threshold: f64,
    mode: UncertainMode,
) -> Result<AlignmentAccuracy, StatsError> {
    let points = alignment_points(frame, mode);
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.alignment, p.accuracy)).collect();
    let regression = ols(&xy)?;
    let aligned: Vec<f64> = points
        .iter()
        .filter(|p| classify_alignment(p.alignment, threshold) == Alignment::Aligned)
        .map(|p| p.accuracy)
        .collect();
    let baseline: Vec<f64> = user_accuracy(frame, InterventionArm::LlmZeroShot, mode)
        .into_values()
        .collect();
    Ok(AlignmentAccuracy {
        regression,
        points,
        aligned_vs_non_personalized: group_means(&aligned, &baseline).ok(),
    })
}

/// Judgment counts for the discernment view: how often each label was given
/// to true and to false claims.
pub fn judgment_matrix(
    frame: &AnalysisFrame,
    arm: InterventionArm,
    phase: Phase,
) -> BTreeMap<(bool, Judgment), usize> {
    let mut m = BTreeMap::new();
    for j in frame.judgments.iter().filter(|j| j.arm == arm && j.phase == phase) {
        *m.entry((j.veracity.is_true(), j.judgment)).or_insert(0) += 1;
    }
    m
}

impl AlignmentAccuracy {
    /// Points and the fitted line with its 95% mean-response band, as CSV
    /// with columns `series,user_id,x,y,lo,hi`.
    pub fn plot_csv(&self, steps: usize) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["series", "user_id", "x", "y", "lo", "hi"]).expect("in-memory write");
        for p in &self.points {
            w.write_record([
                "user",
                p.user_id.as_str(),
                &p.alignment.to_string(),
                &p.accuracy.to_string(),
                "",
                "",
            ])
            .expect("in-memory write");
        }
        let steps = steps.max(1);
        for i in 0..=steps {
            let x = i as f64 / steps as f64;
            let (lo, hi) = self.regression.band(x);
            w.write_record([
                "fit".to_string(),
                String::new(),
                x.to_string(),
                self.regression.predict(x).to_string(),
                lo.to_string(),
                hi.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn summary(&self) -> String {
        let r = &self.regression;
        let mut out = format!(
            "alignment vs accuracy: slope {:.4} [{:.4}, {:.4}], intercept {:.4}, {}, n={}\n",
            r.slope,
            r.slope_ci.0,
            r.slope_ci.1,
            r.intercept,
            super::regression::format_p(r.p_value),
            r.n
        );
        if let Some(g) = &self.aligned_vs_non_personalized {
            out.push_str(&format!("aligned personalized vs. non-personalized: {g}\n"));
        }
        out
    }
}

impl AlignmentHelpfulness {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let line = |name: &str, s: &Option<HelpfulnessSummary>| match s {
            Some(s) => format!("{name:<18} n={:<6} mean {:.2}  helpful {:.2}%\n", s.n, s.mean, s.pct_helpful),
            None => format!("{name:<18} no ratings\n"),
        };
        out.push_str(&line("aligned", &self.aligned));
        out.push_str(&line("misaligned", &self.misaligned));
        out.push_str(&line("non-personalized", &self.non_personalized));
        for (score, s) in &self.by_score {
            out.push_str(&line(&format!("score {score}"), &Some(*s)));
        }
        for (name, sig) in [
            ("aligned vs misaligned", &self.aligned_vs_misaligned),
            ("aligned vs non-personalized", &self.aligned_vs_non_personalized),
        ] {
            if let Some(sig) = sig {
                out.push_str(&format!(
                    "{name}: t-test {}, Mann-Whitney {}\n",
                    super::regression::format_p(sig.t_p),
                    super::regression::format_p(sig.mannwhitney_p)
                ));
            }
        }
        out
    }
}
