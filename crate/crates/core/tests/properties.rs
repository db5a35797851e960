use std::sync::{Arc, OnceLock};

use feedlab_core::engine::{read_log, Engine, EngineParts, ExperimentConfig, LogSnapshot, LogicalClock};
use feedlab_core::fixtures::{mock_provider, synthetic_dataset, synthetic_reference_table};
use feedlab_core::simusers::{run_cohort, Cohort, PolicyMix};
use feedlab_core::stats::*;
use feedlab_core::Dataset;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Recorded {
    snapshot: LogSnapshot,
    dataset: Dataset,
    config: ExperimentConfig,
}

fn recorded() -> &'static Recorded {
    static LOG: OnceLock<Recorded> = OnceLock::new();
    LOG.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let dataset = Arc::new(synthetic_dataset(30, 30));
        let config = ExperimentConfig {
            fsync_every: 4096,
            ..ExperimentConfig::default()
        };
        let reference = synthetic_reference_table();
        let engine = Engine::open(
            dir.path(),
            EngineParts {
                config: config.clone(),
                dataset: dataset.clone(),
                provider: mock_provider(30),
                reference: Some(Arc::new(reference.clone())),
                clock: Arc::new(LogicalClock::new(1)),
            },
        )
        .unwrap();
        let cohort = Cohort::new(&dataset, 5).with_reference(Some(&reference));
        run_cohort(&engine, 80, &PolicyMix::default(), &cohort).unwrap();
        engine.sync().unwrap();
        Recorded {
            snapshot: read_log(dir.path()).unwrap(),
            dataset: (*dataset).clone(),
            config,
        }
    })
}

fn report_json(snap: &LogSnapshot) -> String {
    let r = recorded();
    let frame = AnalysisFrame::build(snap, &r.dataset, &r.config);
    let opts = AccuracyOptions {
        bootstrap: BootstrapConfig::with_seed(3),
        ..AccuracyOptions::default()
    };
    ExperimentReport::build(&frame, &opts).unwrap().to_json()
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 2..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn log_line_order_does_not_change_the_report(seed in any::<u64>()) {
        let r = recorded();
        let mut shuffled = LogSnapshot {
            sessions: r.snapshot.sessions.clone(),
            events: r.snapshot.events.clone(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        shuffled.sessions.shuffle(&mut rng);
        shuffled.events.shuffle(&mut rng);
        prop_assert_eq!(shuffled.session_index(), r.snapshot.session_index());
        prop_assert_eq!(report_json(&shuffled), report_json(&r.snapshot));
    }
}

proptest! {
    #[test]
    fn significance_is_symmetric(a in sample(), b in sample()) {
        prop_assume!(a.iter().chain(&b).any(|x| *x != a[0]));
        let ab = significance(&a, &b).unwrap();
        let ba = significance(&b, &a).unwrap();
        prop_assert!((ab.t_p - ba.t_p).abs() < 1e-12);
        prop_assert!((ab.mannwhitney_p - ba.mannwhitney_p).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.t_p) && (0.0..=1.0).contains(&ab.mannwhitney_p));
    }

    #[test]
    fn bootstrap_interval_contains_point(n in 1usize..3000, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let k = ((n as f64) * frac).round() as usize;
        let e = bootstrap_proportion(k, n, &BootstrapConfig::with_seed(seed)).unwrap();
        prop_assert!(0.0 <= e.lo && e.lo <= e.point && e.point <= e.hi && e.hi <= 1.0, "{:?}", e);
        prop_assert!((e.point - k as f64 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn ols_shift_moves_only_the_intercept(
        pts in prop::collection::vec((0.0f64..1.0, -1.0f64..1.0), 3..40),
        shift in -5.0f64..5.0,
    ) {
        prop_assume!(pts.iter().any(|p| (p.0 - pts[0].0).abs() > 1e-3));
        let a = ols(&pts).unwrap();
        let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, y + shift)).collect();
        let b = ols(&moved).unwrap();
        prop_assert!((a.slope - b.slope).abs() < 1e-9);
        prop_assert!((b.intercept - a.intercept - shift).abs() < 1e-9);
        prop_assert!(a.slope_ci.0 <= a.slope && a.slope <= a.slope_ci.1);
    }
}
