use std::path::Path;
use std::sync::Arc;

use feedlab_core::engine::{read_log, Engine, EngineParts, ExperimentConfig, LogicalClock};
use feedlab_core::fixtures::{mock_provider, synthetic_dataset, synthetic_reference_table};
use feedlab_core::simusers::*;
use feedlab_core::stats::*;
use feedlab_core::{Dataset, InterventionArm, Phase, ReferenceTable, SessionLedger};

fn engine(dir: &Path, arms: &[InterventionArm], seed: u64) -> Engine {
    let config = ExperimentConfig {
        seed,
        arms: arms.iter().map(|a| (*a, 1.0)).collect(),
        fsync_every: 512,
        ..ExperimentConfig::default()
    };
    let parts = EngineParts {
        config,
        dataset: Arc::new(synthetic_dataset(40, 40)),
        provider: mock_provider(40),
        reference: Some(Arc::new(synthetic_reference_table())),
        clock: Arc::new(LogicalClock::new(0)),
    };
    Engine::open(dir, parts).unwrap()
}

fn cohort<'a>(dataset: &'a Dataset, table: &'a ReferenceTable, parallelism: usize) -> Cohort<'a> {
    Cohort::new(dataset, 11).with_reference(Some(table)).with_parallelism(parallelism)
}

fn frame(dir: &Path, e: &Engine) -> AnalysisFrame {
    e.sync().unwrap();
    let snap = read_log(dir).unwrap();
    AnalysisFrame::build(&snap, e.dataset(), e.config())
}

fn opts() -> AccuracyOptions {
    AccuracyOptions { bootstrap: BootstrapConfig { resamples: 500, ..BootstrapConfig::with_seed(1) }, ..AccuracyOptions::default() }
}

#[test]
fn full_adoption_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(dir.path(), &[InterventionArm::LabelOnly], 1);
    let table = synthetic_reference_table();
    let policy = AgentPolicy { adoption_prob: 1.0, open_prob: 1.0, ..AgentPolicy::default() };
    let s = run_cohort(&e, 60, &PolicyMix::uniform(policy), &cohort(e.dataset(), &table, 4)).unwrap();
    assert_eq!(s.completed, 60);
    let f = frame(dir.path(), &e);
    assert_eq!(accuracy(&f, InterventionArm::LabelOnly, Phase::Post, &opts()).unwrap().point, 100.0);
}

#[test]
fn no_adoption_stays_at_base() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(dir.path(), &[InterventionArm::LabelOnly], 2);
    let table = synthetic_reference_table();
    let policy = AgentPolicy { adoption_prob: 0.0, base_accuracy: 0.7, ..AgentPolicy::default() };
    run_cohort(&e, 400, &PolicyMix::uniform(policy), &cohort(e.dataset(), &table, 4)).unwrap();
    let f = frame(dir.path(), &e);
    let post = accuracy(&f, InterventionArm::LabelOnly, Phase::Post, &opts()).unwrap();
    let sigma = (0.7f64 * 0.3 / post.n as f64).sqrt() * 100.0;
    assert!((post.point - 70.0).abs() < 3.0 * sigma, "{post:?}");
    let pre = accuracy(&f, InterventionArm::LabelOnly, Phase::Pre, &opts()).unwrap();
    assert_eq!(pre.point, post.point);
}

#[test]
fn logs_replay_through_validation() {
    let dir = tempfile::tempdir().unwrap();
    let arms = [InterventionArm::Control, InterventionArm::ReactionFrame, InterventionArm::LlmPersonalized];
    let e = engine(dir.path(), &arms, 3);
    let table = synthetic_reference_table();
    let policy = AgentPolicy { open_prob: 0.6, uncertain_prob: 0.3, ..AgentPolicy::default() };
    let s = run_cohort(&e, 90, &PolicyMix::uniform(policy), &cohort(e.dataset(), &table, 8)).unwrap();
    assert_eq!(s.completed, 90);
    e.sync().unwrap();
    let snap = read_log(dir.path()).unwrap();
    for info in snap.session_index() {
        let mut ledger = SessionLedger::new(info.session_id.clone(), info.feed.clone());
        let mut events: Vec<_> = snap.events.iter().filter(|ev| ev.session_id == info.session_id).collect();
        events.sort_by_key(|ev| ev.seq);
        for ev in events {
            feedlab_core::domain::validate_event(ev, &ledger).unwrap();
            ledger.apply(ev);
        }
    }
}

#[test]
fn seeded_cohorts_are_byte_identical() {
    let table = synthetic_reference_table();
    let mut logs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let e = engine(dir.path(), &InterventionArm::ALL, 4);
        run_cohort(&e, 30, &PolicyMix::default(), &cohort(e.dataset(), &table, 1)).unwrap();
        e.sync().unwrap();
        drop(e);
        let events = std::fs::read(dir.path().join("events.jsonl")).unwrap();
        let sessions = std::fs::read(dir.path().join("sessions.jsonl")).unwrap();
        logs.push((events, sessions));
    }
    assert!(!logs[0].0.is_empty());
    assert_eq!(logs[0], logs[1]);
}

#[test]
fn parallel_runs_match_sequential_per_session() {
    let table = synthetic_reference_table();
    let mut canon = Vec::new();
    for par in [1, 6] {
        let dir = tempfile::tempdir().unwrap();
        let e = engine(dir.path(), &InterventionArm::ALL, 5);
        run_cohort(&e, 40, &PolicyMix::default(), &cohort(e.dataset(), &table, par)).unwrap();
        e.sync().unwrap();
        let mut events: Vec<_> = read_log(dir.path())
            .unwrap()
            .events
            .into_iter()
            .map(|mut ev| {
                ev.timestamp = 0;
                ev
            })
            .collect();
        events.sort_by(|a, b| (&a.session_id, a.seq).cmp(&(&b.session_id, b.seq)));
        canon.push(events);
    }
    assert_eq!(canon[0], canon[1]);
}

#[test]
fn helpfulness_recovers_configured_bands() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(dir.path(), &[InterventionArm::LlmPersonalized], 6);
    let table = synthetic_reference_table();
    run_cohort(&e, 2500, &PolicyMix::default(), &cohort(e.dataset(), &table, 8)).unwrap();
    let f = frame(dir.path(), &e);
    let h = helpfulness_by_alignment(&f, 0.4);
    let (a, m) = (h.aligned.unwrap(), h.misaligned.unwrap());
    assert!(a.n >= 1500 && m.n >= 1500, "aligned {} misaligned {}", a.n, m.n);
    assert!(a.mean > m.mean);
    assert!((a.mean - 2.9).abs() < 0.1 && (m.mean - 2.6).abs() < 0.1, "{a:?} {m:?}");
    let sig = h.aligned_vs_misaligned.unwrap();
    assert!(sig.t_p < 0.05 && sig.mannwhitney_p < 0.05);
}

#[test]
fn identical_bands_are_not_different() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(dir.path(), &[InterventionArm::LlmPersonalized], 7);
    let table = synthetic_reference_table();
    let policy = AgentPolicy {
        helpfulness: HelpfulnessPolicy::uniform_bands([0.1, 0.2, 0.4, 0.3]),
        ..AgentPolicy::default()
    };
    run_cohort(&e, 300, &PolicyMix::uniform(policy), &cohort(e.dataset(), &table, 8)).unwrap();
    let h = helpfulness_by_alignment(&frame(dir.path(), &e), 0.4);
    let sig = h.aligned_vs_misaligned.unwrap();
    assert!(sig.t_p > 0.001, "{sig:?}");
}

#[test]
fn single_agent_is_too_little_for_regression() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(dir.path(), &[InterventionArm::LlmPersonalized], 8);
    let table = synthetic_reference_table();
    run_cohort(&e, 1, &PolicyMix::default(), &cohort(e.dataset(), &table, 1)).unwrap();
    let err = alignment_regression(&frame(dir.path(), &e), 0.4, UncertainMode::Incorrect).unwrap_err();
    assert!(matches!(err, StatsError::InsufficientData { .. }), "{err:?}");
}

#[test]
fn bad_policy_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let e = engine(dir.path(), &[InterventionArm::Control], 9);
    let table = synthetic_reference_table();
    let policy = AgentPolicy { open_prob: 1.5, ..AgentPolicy::default() };
    let err = run_cohort(&e, 1, &PolicyMix::uniform(policy), &cohort(e.dataset(), &table, 1)).unwrap_err();
    assert!(matches!(err, SimError::InvalidPolicy(_)));
}
