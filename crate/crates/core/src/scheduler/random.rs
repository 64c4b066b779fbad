use rand::Rng;

use super::{ObjectiveWeights, Problem};
use crate::domain::{EmotionState, EventSpec, Horizon, WallTime};

/// Random small instance with up to `max_events` events on up to `max_slots`
/// 30-minute slots. Priorities come from a coarse grid so ties are common,
/// and about a fifth of events are multitask or emotionally sensitive.
pub fn random_problem(rng: &mut impl Rng, max_events: usize, max_slots: u32) -> Problem {
    let slots = rng.random_range(2..=max_slots.max(2));
    let start = WallTime::hm(9, 0);
    let horizon = Horizon::new(start, WallTime(start.0 + 30 * slots), 30).expect("non-empty day");
    let n = rng.random_range(1..=max_events.max(1));
    let events = (0..n)
        .map(|i| {
            let duration = rng.random_range(1..=4) * 15 + rng.random_range(0..15);
            EventSpec::new(
                format!("e{i}"),
                duration,
                rng.random_range(0..=4) as f64 / 4.0,
            )
            .load(rng.random_range(0..=10) as f64 / 10.0)
            .multitask(rng.random_bool(0.2))
            .sensitive(rng.random_bool(0.2))
        })
        .collect();
    let emotion =
        EmotionState::new(rng.random(), rng.random(), rng.random()).expect("unit interval");
    let weights = if rng.random_bool(0.5) {
        ObjectiveWeights::default()
    } else {
        ObjectiveWeights::new(
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.1..2.0),
        )
    };
    Problem::new(events, horizon, emotion).with_weights(weights)
}
