use feedlab_core::stats::*;
use feedlab_core::{ClaimId, Helpfulness, InterventionArm, Judgment, Phase, SessionId, Topic, UserId, Veracity};
use proptest::prelude::*;

const ARM: InterventionArm = InterventionArm::LlmZeroShot;

fn obs(i: usize, trial: u32, phase: Phase, veracity: Veracity, judgment: Judgment) -> JudgmentObs {
    JudgmentObs {
        session_id: SessionId::new(format!("s{i:06}")),
        user_id: UserId::new(format!("u{i:06}")),
        arm: ARM,
        trial,
        claim_id: ClaimId::new(format!("c{i}")),
        veracity,
        topic: Topic::Political,
        phase,
        judgment,
    }
}

fn impression(i: usize, phase: Phase, veracity: Veracity, flagged: bool, shared: bool) -> Impression {
    Impression {
        session_id: SessionId::new(format!("s{i:06}")),
        arm: ARM,
        claim_id: ClaimId::new(format!("c{i}")),
        veracity,
        topic: Topic::Political,
        phase,
        liked: false,
        shared,
        flagged,
    }
}

fn rating(i: usize, arm: InterventionArm, r: u8) -> RatingObs {
    RatingObs {
        session_id: SessionId::new(format!("s{i:06}")),
        user_id: UserId::new(format!("u{i:06}")),
        arm,
        claim_id: ClaimId::new(format!("c{i}")),
        topic: Topic::Political,
        rating: Helpfulness::new(r).unwrap(),
        alignment: None,
    }
}

fn opts() -> AccuracyOptions {
    AccuracyOptions {
        bootstrap: BootstrapConfig::with_seed(7),
        ..AccuracyOptions::default()
    }
}

#[test]
fn eighty_of_one_hundred() {
    let mut frame = AnalysisFrame::default();
    for i in 0..100 {
        let j = if i < 80 { Judgment::True } else { Judgment::False };
        frame.judgments.push(obs(i, 1, Phase::Pre, Veracity::True, j));
    }
    let e = accuracy(&frame, ARM, Phase::Pre, &opts()).unwrap();
    assert_eq!(e.point, 80.0);
    assert_eq!(e.n, 100);
    assert!(e.contains(80.0));
}

#[test]
fn all_uncertain() {
    let mut frame = AnalysisFrame::default();
    for i in 0..100 {
        frame.judgments.push(obs(i, 1, Phase::Pre, Veracity::False, Judgment::Uncertain));
    }
    assert_eq!(accuracy(&frame, ARM, Phase::Pre, &opts()).unwrap().point, 0.0);
    let exclude = AccuracyOptions {
        uncertain: UncertainMode::Exclude,
        ..opts()
    };
    assert!(matches!(
        accuracy(&frame, ARM, Phase::Pre, &exclude),
        Err(StatsError::EmptySelection(_))
    ));
}

#[test]
fn binomial_interval_near_normal_oracle() {
    let mut frame = AnalysisFrame::default();
    for i in 0..1000 {
        let j = if i % 2 == 0 { Judgment::True } else { Judgment::False };
        frame.judgments.push(obs(i, 1, Phase::Pre, Veracity::True, j));
    }
    let e = accuracy(&frame, ARM, Phase::Pre, &opts()).unwrap();
    let half = 1.96 * (0.25f64 / 1000.0).sqrt() * 100.0;
    assert!((e.lo - (50.0 - half)).abs() <= 0.5, "{e:?}");
    assert!((e.hi - (50.0 + half)).abs() <= 0.5, "{e:?}");
}

#[test]
fn revealed_only_pre_selection() {
    let mut frame = AnalysisFrame::default();
    frame.judgments.push(obs(0, 1, Phase::Pre, Veracity::True, Judgment::True));
    frame.judgments.push(obs(0, 1, Phase::Post, Veracity::True, Judgment::True));
    frame.judgments.push(obs(1, 1, Phase::Pre, Veracity::True, Judgment::False));
    let all = accuracy(&frame, ARM, Phase::Pre, &opts()).unwrap();
    assert_eq!(all.point, 50.0);
    let revealed = AccuracyOptions {
        pre_selection: PreSelection::Revealed,
        ..opts()
    };
    assert_eq!(accuracy(&frame, ARM, Phase::Pre, &revealed).unwrap().point, 100.0);
}

#[test]
fn five_shares_in_one_hundred() {
    let mut frame = AnalysisFrame::default();
    for i in 0..100 {
        frame.impressions.push(impression(i, Phase::Pre, Veracity::False, false, i < 5));
    }
    let r = interaction_rates(&frame, ARM, Phase::Pre).unwrap();
    assert_eq!(r.false_share, 5.0);
    assert_eq!(r.false_flag, 0.0);
    assert_eq!(r.true_share, 0.0);
}

#[test]
fn flag_rates_fixture() {
    let mut frame = AnalysisFrame::default();
    for i in 0..1000 {
        frame.impressions.push(impression(i, Phase::Pre, Veracity::False, i < 31, false));
        frame.impressions.push(impression(i, Phase::Post, Veracity::False, i < 381, false));
        frame.judgments.push(obs(i, 1, Phase::Pre, Veracity::False, Judgment::False));
    }
    let pre = interaction_rates(&frame, ARM, Phase::Pre).unwrap();
    let post = interaction_rates(&frame, ARM, Phase::Post).unwrap();
    assert_eq!(format!("{:.2}", pre.false_flag), "3.10");
    assert_eq!(format!("{:.2}", post.false_flag), "38.10");
    let report = ExperimentReport {
        subset: None,
        balance: None,
        excluded_users: 0,
        sessions: 0,
        arms: vec![ArmReport::build(&frame, ARM, &opts()).unwrap()],
    };
    let table = report.to_table();
    assert!(table.contains("3.10"), "{table}");
    assert!(table.contains("38.10"), "{table}");
}

#[test]
fn helpfulness_examples() {
    let s = summarize_ratings(&[4, 3, 2, 1]).unwrap();
    assert_eq!((s.pct_helpful, s.mean), (50.0, 2.5));
    let s = summarize_ratings(&[4, 4, 3, 1]).unwrap();
    assert_eq!((s.pct_helpful, s.mean), (75.0, 3.0));
    let s = summarize_ratings(&[4, 4, 4]).unwrap();
    assert_eq!((s.pct_helpful, s.mean), (100.0, 4.0));
    let mut frame = AnalysisFrame::default();
    for (i, r) in [4, 3, 2, 1].into_iter().enumerate() {
        frame.ratings.push(rating(i, ARM, r));
    }
    assert_eq!(helpfulness(&frame, ARM).unwrap().pct_helpful, 50.0);
    assert!(matches!(
        helpfulness(&frame, InterventionArm::Control),
        Err(StatsError::EmptySelection(_))
    ));
}

#[test]
fn estimate_display() {
    let e = Estimate { point: 97.654, lo: 96.031, hi: 99.2749, n: 10 };
    assert_eq!(e.to_string(), "97.65 [96.03, 99.27]");
}

#[test]
fn arm_report_invariants() {
    let mut frame = AnalysisFrame::default();
    for i in 0..200 {
        let pre = if i % 2 == 0 { Judgment::True } else { Judgment::Uncertain };
        let post = if i % 10 == 0 { Judgment::False } else { Judgment::True };
        frame.judgments.push(obs(i, 1, Phase::Pre, Veracity::True, pre));
        frame.judgments.push(obs(i, 1, Phase::Post, Veracity::True, post));
        frame.impressions.push(impression(i, Phase::Pre, Veracity::False, false, i % 7 == 0));
    }
    let a = ArmReport::build(&frame, ARM, &opts()).unwrap();
    let post = a.acc_post.unwrap();
    assert_eq!(a.delta.unwrap(), post.point - a.acc_pre.point);
    assert!(a.acc_pre.contains(a.acc_pre.point) && post.contains(post.point));
    assert_eq!((a.n_pre, a.n_post), (200, 200));
    for p in [a.acc_pre.lo, a.acc_pre.hi, post.lo, post.hi, a.false_share_pre] {
        assert!((0.0..=100.0).contains(&p));
    }
}

#[test]
fn unbalanced_subset_warns() {
    let b = BalanceCheck::of(&[]);
    assert!(b.balanced);
    let report = ExperimentReport {
        subset: Some("topic=medical".into()),
        balance: Some(BalanceCheck { n_true: 30, n_false: 20, balanced: false }),
        excluded_users: 0,
        sessions: 0,
        arms: vec![],
    };
    assert!(report.warning().unwrap().contains("30 true vs 20 false"));
}

proptest! {
    #[test]
    fn pooled_is_weighted_mean_of_trials(
        trials in prop::collection::vec(prop::collection::vec(any::<bool>(), 1..40), 1..6)
    ) {
        let mut frame = AnalysisFrame::default();
        let mut i = 0;
        for (t, outcomes) in trials.iter().enumerate() {
            for &ok in outcomes {
                let j = if ok { Judgment::True } else { Judgment::False };
                frame.judgments.push(obs(i, t as u32 + 1, Phase::Pre, Veracity::True, j));
                i += 1;
            }
        }
        let b = accuracy_by_trial(&frame, ARM, Phase::Pre, &opts()).unwrap();
        let total: usize = b.trials.iter().map(|t| t.total).sum();
        let weighted: f64 = b.trials.iter().map(|t| t.accuracy * t.total as f64).sum::<f64>() / total as f64;
        prop_assert!((b.pooled - weighted).abs() < 1e-9);
        let pooled = accuracy(&frame, ARM, Phase::Pre, &opts()).unwrap().point;
        prop_assert!((b.pooled - pooled).abs() < 1e-9);
    }
}
