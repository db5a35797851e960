use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use feedlab_bench::{reference, survey, EXPLANATION};
use feedlab_core::engine::{Engine, EngineParts, ExperimentConfig, LogicalClock};
use feedlab_core::fixtures::{mock_provider, synthetic_dataset};
use feedlab_core::lingua::{text_metrics, HeylighenDewaele};
use feedlab_core::simusers::{run_cohort, Cohort, PolicyMix};
use feedlab_core::stats::{bootstrap_proportion, significance, BootstrapConfig};
use feedlab_core::{infer_attributes, PriorMode};

fn stats(c: &mut Criterion) {
    c.bench_function("bootstrap_proportion 10k resamples", |b| {
        let cfg = BootstrapConfig::with_seed(1);
        b.iter(|| bootstrap_proportion(black_box(612), black_box(1000), &cfg).unwrap())
    });
    let a: Vec<f64> = (0..200).map(|i| (i % 4 + 1) as f64).collect();
    let b2: Vec<f64> = (0..180).map(|i| (i % 3 + 1) as f64).collect();
    c.bench_function("significance n=200 vs 180", |b| {
        b.iter(|| significance(black_box(&a), black_box(&b2)).unwrap())
    });
}

fn personalization(c: &mut Criterion) {
    let table = reference();
    let answers = survey(&table);
    c.bench_function("infer_attributes", |b| {
        b.iter(|| infer_attributes(black_box(&answers), &table, PriorMode::Uniform).unwrap())
    });
}

fn lingua(c: &mut Criterion) {
    c.bench_function("text_metrics 60 words", |b| {
        b.iter(|| text_metrics(black_box(EXPLANATION), &HeylighenDewaele).unwrap())
    });
}

fn engine(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    group.bench_function("100 simulated sessions", |b| {
        b.iter_batched(
            || tempfile::tempdir().unwrap(),
            |dir| {
                let dataset = Arc::new(synthetic_dataset(40, 40));
                let parts = EngineParts {
                    config: ExperimentConfig {
                        fsync_every: 4096,
                        ..ExperimentConfig::default()
                    },
                    dataset: dataset.clone(),
                    provider: mock_provider(40),
                    reference: None,
                    clock: Arc::new(LogicalClock::new(1)),
                };
                let engine = Engine::open(dir.path(), parts).unwrap();
                run_cohort(&engine, 100, &PolicyMix::default(), &Cohort::new(&dataset, 3)).unwrap()
            },
            BatchSize::PerIteration,
        )
    });
    group.finish();
}

criterion_group!(benches, stats, personalization, lingua, engine);
criterion_main!(benches);
