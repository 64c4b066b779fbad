//! Results must not depend on how many threads rayon uses.
#![cfg(feature = "parallel")]

use emocal_core::behavior::{
    drop_singletons, generate_activity_log, partition, smote, train_forest, ActivityKind,
    ActivityLogConfig, ForestConfig,
};
use emocal_core::scheduler::{brute_force_solve, random_problem};
use emocal_core::seqnet::{backward, CellKind, RecurrentModel};
use emocal_core::Level;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn on_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn one_and_four_threads_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let windows: Vec<Vec<f64>> = (0..24)
        .map(|_| (0..10).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let labels: Vec<Level> = (0..24).map(|i| Level::from_index(i % 2)).collect();
    let model = RecurrentModel::init(CellKind::Gru, 6, 1, 3);
    let log = generate_activity_log(&ActivityLogConfig {
        sessions: 4,
        events_per_session: 200,
        ..Default::default()
    });
    let table = drop_singletons(partition(&log).unwrap().table(ActivityKind::MouseMovement));
    let problems: Vec<_> = (0..8u64)
        .map(|s| random_problem(&mut ChaCha8Rng::seed_from_u64(s), 6, 16))
        .collect();

    let run = || {
        let grad = backward(&model, &windows, &labels).unwrap();
        let balanced = smote(&table, 60, 5, 1).unwrap();
        let forest = train_forest(
            &balanced,
            &ForestConfig {
                n_trees: 8,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let schedules: Vec<_> = problems.iter().map(|p| brute_force_solve(p).ok()).collect();
        (grad, balanced, forest, schedules)
    };
    let one = on_pool(1, run);
    let four = on_pool(4, run);
    assert!(one.0 == four.0, "gradients differ");
    assert!(one.1 == four.1, "oversampled tables differ");
    assert!(one.2 == four.2, "forests differ");
    assert!(one.3 == four.3, "schedules differ");
}
