use serde::{Deserialize, Serialize};

use super::{sort_placements, Problem, SchedulerError};
use crate::domain::ScheduledEvent;

/// A pluggable objective term. Lower is better.
pub trait ObjectiveTerm: Send + Sync {
    fn score(&self, placements: &[ScheduledEvent], problem: &Problem) -> f64;

    /// A value no complete schedule of `problem` scores below. The solver
    /// prunes with it; the default disables pruning for this term.
    fn lower_bound(&self, _problem: &Problem) -> f64 {
        f64::NEG_INFINITY
    }
}

impl<F> ObjectiveTerm for F
where
    F: Fn(&[ScheduledEvent], &Problem) -> f64 + Send + Sync,
{
    fn score(&self, placements: &[ScheduledEvent], problem: &Problem) -> f64 {
        self(placements, problem)
    }
}

/// Unweighted value of every objective term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Breakdown {
    pub temporal: f64,
    pub cognitive: f64,
    pub emotional: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<(String, f64)>,
}

impl Breakdown {
    /// `sum_k weight_k * term_k` in a fixed order.
    pub fn weighted_sum(&self, problem: &Problem) -> f64 {
        let w = &problem.weights;
        let mut total = w.temporal * self.temporal
            + w.cognitive * self.cognitive
            + w.emotional * self.emotional;
        for (extra, (_, value)) in w.extras.iter().zip(&self.extras) {
            total += extra.weight * value;
        }
        total
    }
}

/// Idle slots between the first start and the last end, as a fraction of the day.
pub(crate) fn temporal_term(sorted: &[ScheduledEvent], slot_count: u32) -> f64 {
    idle_slots(sorted) as f64 / slot_count as f64
}

/// Uncovered slots inside `[first start, last end)`; `sorted` by start.
fn idle_slots(sorted: &[ScheduledEvent]) -> u32 {
    let Some(first) = sorted.first() else {
        return 0;
    };
    let mut idle = 0;
    let mut reach = first.end_slot;
    for p in &sorted[1..] {
        if p.start_slot > reach {
            idle += p.start_slot - reach;
        }
        reach = reach.max(p.end_slot);
    }
    idle
}

/// Mean product of cognitive loads over consecutive events.
pub(crate) fn cognitive_term(sorted: &[ScheduledEvent]) -> f64 {
    if sorted.len() < 2 {
        return 0.0;
    }
    let sum: f64 = sorted
        .windows(2)
        .map(|w| w[0].event.cognitive_load * w[1].event.cognitive_load)
        .sum();
    sum / (sorted.len() - 1) as f64
}

/// Mean amount by which each event's load exceeds the user's readiness.
pub(crate) fn emotional_term(problem: &Problem) -> f64 {
    let readiness = problem.emotion.readiness();
    let sum: f64 = problem
        .events
        .iter()
        .map(|e| (e.cognitive_load - readiness).max(0.0))
        .sum();
    sum / problem.events.len() as f64
}

/// Weighted objective of a complete placement and its per-term breakdown.
pub fn evaluate_objective(
    placements: &[ScheduledEvent],
    problem: &Problem,
) -> Result<(f64, Breakdown), SchedulerError> {
    if placements.is_empty() {
        return Err(SchedulerError::EmptySchedule);
    }
    let mut sorted = placements.to_vec();
    sort_placements(&mut sorted);
    let breakdown = Breakdown {
        temporal: temporal_term(&sorted, problem.horizon.slot_count()),
        cognitive: cognitive_term(&sorted),
        emotional: emotional_term(problem),
        extras: problem
            .weights
            .extras
            .iter()
            .map(|e| (e.name.clone(), e.scorer.score(&sorted, problem)))
            .collect(),
    };
    Ok((breakdown.weighted_sum(problem), breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EmotionState, EventSpec, Horizon};
    use crate::scheduler::{ExtraTerm, ObjectiveWeights};

    fn place(problem: &Problem, starts: &[u32]) -> Vec<ScheduledEvent> {
        problem
            .events
            .iter()
            .zip(starts)
            .map(|(e, &s)| ScheduledEvent::new(e.clone(), s, &problem.horizon))
            .collect()
    }

    #[test]
    fn single_event_has_no_idle_or_pairs() {
        let p = Problem::new(
            vec![EventSpec::new("a", 60, 0.5).load(0.9)],
            Horizon::default(),
            EmotionState::neutral(),
        )
        .with_weights(ObjectiveWeights::new(3.0, 2.0, 1.0));
        let (_, b) = evaluate_objective(&place(&p, &[5]), &p).unwrap();
        assert_eq!(b.temporal, 0.0);
        assert_eq!(b.cognitive, 0.0);
    }

    #[test]
    fn back_to_back_full_load_pair() {
        let p = Problem::new(
            vec![
                EventSpec::new("a", 30, 0.5).load(1.0),
                EventSpec::new("b", 30, 0.5).load(1.0),
            ],
            Horizon::default(),
            EmotionState::neutral(),
        )
        .with_weights(ObjectiveWeights::new(0.0, 1.0, 0.0));
        let (obj, _) = evaluate_objective(&place(&p, &[0, 1]), &p).unwrap();
        assert_eq!(obj, 1.0);
    }

    #[test]
    fn three_event_example_matches_hand_recomputation() {
        // readiness (0.5 + 0.5 + 0.5) / 3 = 0.5
        let p = Problem::new(
            vec![
                EventSpec::new("a", 30, 0.5).load(0.8),
                EventSpec::new("b", 30, 0.5).load(0.2),
                EventSpec::new("c", 30, 0.5).load(0.8),
            ],
            Horizon::default(),
            EmotionState::neutral(),
        );
        let (obj, b) = evaluate_objective(&place(&p, &[0, 1, 3]), &p).unwrap();

        // Spreadsheet-style recomputation, term by term.
        let slots_used = [true, true, false, true];
        let idle = slots_used.iter().filter(|&&u| !u).count() as f64;
        let temporal = idle / 18.0;
        let pair_products = [0.8 * 0.2, 0.2 * 0.8];
        let cognitive = pair_products.iter().sum::<f64>() / 2.0;
        let overloads = [0.8f64 - 0.5, 0.0, 0.8 - 0.5];
        let emotional = overloads.iter().sum::<f64>() / 3.0;

        assert!((b.temporal - temporal).abs() < 1e-15);
        assert!((b.cognitive - cognitive).abs() < 1e-15);
        assert!((b.emotional - emotional).abs() < 1e-15);
        assert!((obj - (temporal + cognitive + emotional)).abs() < 1e-12);
        assert!((obj - 0.415_555_555_555_555_5).abs() < 1e-12);
    }

    #[test]
    fn multitask_overlap_counts_once() {
        let p = Problem::new(
            vec![
                EventSpec::new("a", 90, 0.5).multitask(true),
                EventSpec::new("b", 30, 0.5).multitask(true),
                EventSpec::new("c", 30, 0.5),
            ],
            Horizon::default(),
            EmotionState::neutral(),
        );
        // a covers 0..3, b sits inside it, c starts at 5: idle 3 and 4
        let (_, b) = evaluate_objective(&place(&p, &[0, 1, 5]), &p).unwrap();
        assert_eq!(b.temporal, 2.0 / 18.0);
    }

    #[test]
    fn extras_are_weighted_and_reported() {
        let late = |ps: &[ScheduledEvent], _: &Problem| -> f64 {
            ps.iter().map(|p| p.start_slot as f64).sum()
        };
        let p = Problem::new(
            vec![EventSpec::new("a", 30, 0.5).load(0.0)],
            Horizon::default(),
            EmotionState::neutral(),
        )
        .with_weights(
            ObjectiveWeights::new(0.0, 0.0, 0.0).with_extra(ExtraTerm::new("late", 0.5, late)),
        );
        let (obj, b) = evaluate_objective(&place(&p, &[4]), &p).unwrap();
        assert_eq!(b.extras, vec![("late".to_string(), 4.0)]);
        assert_eq!(obj, 2.0);
    }

    #[test]
    fn empty_schedule_is_an_error() {
        let p = Problem::new(
            vec![EventSpec::new("a", 30, 0.5)],
            Horizon::default(),
            EmotionState::neutral(),
        );
        assert_eq!(
            evaluate_objective(&[], &p),
            Err(SchedulerError::EmptySchedule)
        );
    }
}
