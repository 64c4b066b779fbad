//! Each hot path timed on a one-thread rayon pool and on the default pool.
//! Built with `--no-default-features` both variants run the sequential code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use emocal_core::behavior::{
    generate_activity_log, partition, smote, train_forest, ActivityKind, ActivityLogConfig,
    ForestConfig,
};
use emocal_core::scheduler::{brute_force_solve, random_problem, Problem};
use emocal_core::seqnet::{backward, CellKind, RecurrentModel};
use emocal_core::Level;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let default = rayon::current_num_threads();
    let mut out = vec![(
        "sequential".to_owned(),
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .expect("pool"),
    )];
    out.push((
        format!("pool-{default}"),
        rayon::ThreadPoolBuilder::new()
            .num_threads(default)
            .build()
            .expect("pool"),
    ));
    out
}

fn busiest_problem() -> Problem {
    // the instance with the most events among the first few seeds
    (0..32u64)
        .map(|s| random_problem(&mut ChaCha8Rng::seed_from_u64(s), 6, 16))
        .filter(|p| brute_force_solve(p).is_ok())
        .max_by_key(|p| p.events.len())
        .expect("some feasible instance")
}

fn bench(c: &mut Criterion) {
    let problem = busiest_problem();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let windows: Vec<Vec<f64>> = (0..64)
        .map(|_| (0..32).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let labels: Vec<Level> = (0..64).map(|i| Level::from_index(i % 2)).collect();
    let model = RecurrentModel::init(CellKind::Lstm, 32, 1, 1);
    let log = generate_activity_log(&ActivityLogConfig {
        sessions: 12,
        ..Default::default()
    });
    let mouse = partition(&log)
        .expect("valid log")
        .table(ActivityKind::MouseMovement)
        .clone();
    let balanced = smote(&mouse, 500, 5, 0).expect("oversampling");

    let mut group = c.benchmark_group("parallel_vs_sequential");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("brute_force_solve", &name), |b| {
            b.iter(|| pool.install(|| brute_force_solve(&problem)))
        });
        group.bench_function(BenchmarkId::new("lstm_batch_gradient", &name), |b| {
            b.iter(|| pool.install(|| backward(&model, &windows, &labels)))
        });
        group.bench_function(BenchmarkId::new("smote", &name), |b| {
            b.iter(|| pool.install(|| smote(&mouse, 500, 5, 0)))
        });
        group.bench_function(BenchmarkId::new("forest_training", &name), |b| {
            b.iter(|| pool.install(|| train_forest(&balanced, &ForestConfig::default(), 0)))
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
