//! Emotion-extended constraint-satisfaction scheduling.
//!
//! A [`Problem`] is a set of events (the variables), a [`Horizon`] whose slots
//! are the domain of every start time, and four hard constraints:
//!
//! 1. non-multitask events never overlap,
//! 2. a strictly higher-priority event never starts later,
//! 3. under high arousal, a demanding event is followed by a low-demand one or a break,
//! 4. under high arousal with negative valence, no sensitive event is scheduled.
//!
//! Among feasible assignments, [`solve`] returns the one minimizing the
//! weighted objective of [`evaluate_objective`]. [`brute_force_solve`] is an
//! exhaustive oracle with the same tie-breaking, for small instances.

mod constraints;
mod objective;
mod oracle;
mod random;
mod search;

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, EmotionState, EventId, EventSpec, Horizon, ScheduledEvent};

pub use constraints::{
    check_c1, check_c2, check_c3, check_c4, is_stressed_and_negative, violations, ConstraintKind,
    Violation,
};
pub use objective::{evaluate_objective, Breakdown, ObjectiveTerm};
pub use oracle::{brute_force_solve, MAX_ORACLE_EVENTS, MAX_ORACLE_SLOTS};
pub use random::random_problem;
pub use search::solve;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("no feasible schedule: {0}")]
    Infeasible(InfeasibleReason),
    #[error("cannot evaluate an empty schedule")]
    EmptySchedule,
    #[error("instance too large for exhaustive search ({events} events, {slots} slots)")]
    InstanceTooLarge { events: usize, slots: u32 },
}

/// Why no assignment satisfies the hard constraints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// An event has no start slot at all inside the horizon and its window.
    NoStartSlot {
        id: EventId,
        slots_needed: u32,
        slot_count: u32,
    },
    /// Exclusive events need more slots than the day has.
    CapacityExceeded { required: u32, available: u32 },
    /// Sensitive events while the user is stressed with negative valence.
    SensitiveWhileStressed { ids: Vec<EventId> },
    /// Capacity suffices but every assignment breaks some constraint.
    NoFeasibleAssignment,
}

impl fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfeasibleReason::NoStartSlot {
                id,
                slots_needed,
                slot_count,
            } => write!(
                f,
                "event {id} needs {slots_needed} slots and has no admissible start in a {slot_count}-slot day"
            ),
            InfeasibleReason::CapacityExceeded {
                required,
                available,
            } => write!(
                f,
                "events need at least {required} exclusive slots but only {available} exist"
            ),
            InfeasibleReason::SensitiveWhileStressed { ids } => {
                let ids: Vec<&str> = ids.iter().map(EventId::as_str).collect();
                write!(
                    f,
                    "sensitive events [{}] cannot be scheduled in a stressed, negative state",
                    ids.join(", ")
                )
            }
            InfeasibleReason::NoFeasibleAssignment => {
                f.write_str("every assignment violates a constraint")
            }
        }
    }
}

/// An additional objective term with its weight.
#[derive(Clone)]
pub struct ExtraTerm {
    pub name: String,
    pub weight: f64,
    pub scorer: Arc<dyn ObjectiveTerm>,
}

impl ExtraTerm {
    pub fn new(name: impl Into<String>, weight: f64, scorer: impl ObjectiveTerm + 'static) -> Self {
        Self {
            name: name.into(),
            weight,
            scorer: Arc::new(scorer),
        }
    }
}

impl fmt::Debug for ExtraTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExtraTerm")
            .field("name", &self.name)
            .field("weight", &self.weight)
            .finish_non_exhaustive()
    }
}

/// Weights of the objective terms. Extra terms are code, so they do not
/// serialize.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    #[serde(rename = "alpha_temporal")]
    pub temporal: f64,
    #[serde(rename = "alpha_cognitive")]
    pub cognitive: f64,
    #[serde(rename = "alpha_emotional")]
    pub emotional: f64,
    #[serde(skip)]
    pub extras: Vec<ExtraTerm>,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

impl PartialEq for ObjectiveWeights {
    fn eq(&self, other: &Self) -> bool {
        self.temporal == other.temporal
            && self.cognitive == other.cognitive
            && self.emotional == other.emotional
            && self.extras.len() == other.extras.len()
            && self.extras.iter().zip(&other.extras).all(|(a, b)| {
                a.name == b.name && a.weight == b.weight && Arc::ptr_eq(&a.scorer, &b.scorer)
            })
    }
}

impl ObjectiveWeights {
    pub fn new(temporal: f64, cognitive: f64, emotional: f64) -> Self {
        Self {
            temporal,
            cognitive,
            emotional,
            extras: Vec::new(),
        }
    }

    pub fn with_extra(mut self, extra: ExtraTerm) -> Self {
        self.extras.push(extra);
        self
    }

    /// Multiplies every weight, including extras, by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.temporal *= factor;
        out.cognitive *= factor;
        out.emotional *= factor;
        for e in &mut out.extras {
            e.weight *= factor;
        }
        out
    }

    pub fn validate(&self) -> Result<(), SchedulerError> {
        let all = [self.temporal, self.cognitive, self.emotional]
            .into_iter()
            .chain(self.extras.iter().map(|e| e.weight));
        let mut sum = 0.0;
        for w in all {
            if !w.is_finite() || w < 0.0 {
                return Err(SchedulerError::Invalid(format!(
                    "objective weight {w} must be finite and non-negative"
                )));
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(SchedulerError::Invalid(
                "objective weights sum to zero".into(),
            ));
        }
        Ok(())
    }
}

/// Thresholds that turn the emotional constraints into concrete rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintThresholds {
    /// Arousal at or above this counts as stressed.
    pub t_stress: f64,
    /// Cognitive load at or above this is demanding.
    pub c_high: f64,
    /// Cognitive load at or below this is low-demand.
    pub c_low: f64,
    /// Gap (in slots) that counts as a break after a demanding event.
    pub break_slots: u32,
}

impl Default for ConstraintThresholds {
    fn default() -> Self {
        Self {
            t_stress: 0.7,
            c_high: 0.7,
            c_low: 0.3,
            break_slots: 1,
        }
    }
}

impl ConstraintThresholds {
    pub fn validate(&self) -> Result<(), SchedulerError> {
        for (name, v) in [
            ("t_stress", self.t_stress),
            ("c_high", self.c_high),
            ("c_low", self.c_low),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SchedulerError::Invalid(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
        }
        if self.c_low >= self.c_high {
            return Err(SchedulerError::Invalid(format!(
                "c_low ({}) must be below c_high ({})",
                self.c_low, self.c_high
            )));
        }
        if self.break_slots == 0 {
            return Err(SchedulerError::Invalid(
                "break_slots must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub emotion: EmotionState,
    #[serde(default)]
    pub weights: ObjectiveWeights,
    #[serde(default)]
    pub thresholds: ConstraintThresholds,
}

impl Problem {
    pub fn new(events: Vec<EventSpec>, horizon: Horizon, emotion: EmotionState) -> Self {
        Self {
            events,
            horizon,
            emotion,
            weights: ObjectiveWeights::default(),
            thresholds: ConstraintThresholds::default(),
        }
    }

    pub fn with_weights(mut self, weights: ObjectiveWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_thresholds(mut self, thresholds: ConstraintThresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn validate(&self) -> Result<(), SchedulerError> {
        if self.events.is_empty() {
            return Err(SchedulerError::Invalid("no events to schedule".into()));
        }
        let mut seen = HashSet::new();
        for e in &self.events {
            e.validate()?;
            if !seen.insert(&e.id) {
                return Err(SchedulerError::Invalid(format!(
                    "duplicate event id {}",
                    e.id
                )));
            }
        }
        self.horizon.validate()?;
        self.emotion.validate()?;
        self.weights.validate()?;
        self.thresholds.validate()
    }

    /// Admissible start slots of an event: inside the horizon and its window.
    pub fn start_range(&self, event: &EventSpec) -> std::ops::RangeInclusive<u32> {
        let slots = self.horizon.slot_count();
        let len = self.horizon.slots_for(event.duration_min);
        let lo = event.earliest.unwrap_or(0);
        match slots.checked_sub(len) {
            Some(last) => lo..=event.latest.map_or(last, |l| l.min(last)),
            #[allow(clippy::reversed_empty_ranges)]
            None => 1..=0,
        }
    }

    /// Cheap necessary conditions, checked before any search.
    pub(crate) fn precheck(&self) -> Result<(), SchedulerError> {
        let slots = self.horizon.slot_count();
        for e in &self.events {
            if self.start_range(e).is_empty() {
                return Err(SchedulerError::Infeasible(InfeasibleReason::NoStartSlot {
                    id: e.id.clone(),
                    slots_needed: self.horizon.slots_for(e.duration_min),
                    slot_count: slots,
                }));
            }
        }
        let exclusive: u32 = self
            .events
            .iter()
            .filter(|e| !e.multitask)
            .map(|e| self.horizon.slots_for(e.duration_min))
            .sum();
        let shared = self
            .events
            .iter()
            .filter(|e| e.multitask)
            .map(|e| self.horizon.slots_for(e.duration_min))
            .max()
            .unwrap_or(0);
        if exclusive + shared > slots {
            return Err(SchedulerError::Infeasible(
                InfeasibleReason::CapacityExceeded {
                    required: exclusive + shared,
                    available: slots,
                },
            ));
        }
        if is_stressed_and_negative(&self.emotion, &self.thresholds) {
            let ids: Vec<EventId> = self
                .events
                .iter()
                .filter(|e| e.sensitive)
                .map(|e| e.id.clone())
                .collect();
            if !ids.is_empty() {
                return Err(SchedulerError::Infeasible(
                    InfeasibleReason::SensitiveWhileStressed { ids },
                ));
            }
        }
        Ok(())
    }
}

/// A solved placement of every event with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Ordered by start slot, then id.
    pub placements: Vec<ScheduledEvent>,
    pub objective: f64,
    pub breakdown: Breakdown,
}

impl Schedule {
    pub(crate) fn from_starts(
        problem: &Problem,
        starts: &[(usize, u32)],
    ) -> Result<Self, SchedulerError> {
        let mut placements: Vec<ScheduledEvent> = starts
            .iter()
            .map(|&(i, s)| ScheduledEvent::new(problem.events[i].clone(), s, &problem.horizon))
            .collect();
        sort_placements(&mut placements);
        let (objective, breakdown) = evaluate_objective(&placements, problem)?;
        Ok(Self {
            placements,
            objective,
            breakdown,
        })
    }

    pub fn placement(&self, id: &EventId) -> Option<&ScheduledEvent> {
        self.placements.iter().find(|p| &p.event.id == id)
    }

    /// Start slots listed in ascending event-id order; the tie-break key.
    pub fn tie_key(&self) -> Vec<u32> {
        tie_key(&self.placements)
    }
}

pub(crate) fn sort_placements(placements: &mut [ScheduledEvent]) {
    placements.sort_by(|a, b| {
        a.start_slot
            .cmp(&b.start_slot)
            .then_with(|| a.event.id.cmp(&b.event.id))
    });
}

pub(crate) fn tie_key(placements: &[ScheduledEvent]) -> Vec<u32> {
    let mut by_id: Vec<&ScheduledEvent> = placements.iter().collect();
    by_id.sort_by(|a, b| a.event.id.cmp(&b.event.id));
    by_id.iter().map(|p| p.start_slot).collect()
}

/// True when `(objective, key)` beats the incumbent. Objectives compare
/// exactly; equal objectives prefer earlier starts in event-id order.
pub(crate) fn improves(objective: f64, key: &[u32], best: Option<(f64, &[u32])>) -> bool {
    match best {
        None => true,
        Some((best_obj, best_key)) => {
            objective < best_obj || (objective == best_obj && key < best_key)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::WallTime;

    #[test]
    fn problem_validation() {
        let h = Horizon::default();
        let p = Problem::new(vec![], h, EmotionState::neutral());
        assert!(matches!(p.validate(), Err(SchedulerError::Invalid(_))));

        let dup = Problem::new(
            vec![EventSpec::new("a", 30, 0.5), EventSpec::new("a", 30, 0.5)],
            h,
            EmotionState::neutral(),
        );
        assert!(dup.validate().is_err());

        let zero_w = Problem::new(
            vec![EventSpec::new("a", 30, 0.5)],
            h,
            EmotionState::neutral(),
        )
        .with_weights(ObjectiveWeights::new(0.0, 0.0, 0.0));
        assert!(zero_w.validate().is_err());

        let bad_th = ConstraintThresholds {
            c_low: 0.8,
            c_high: 0.7,
            ..Default::default()
        };
        assert!(bad_th.validate().is_err());
    }

    #[test]
    fn start_range_respects_window_and_length() {
        let h = Horizon::new(WallTime::hm(9, 0), WallTime::hm(11, 0), 30).unwrap();
        let p = Problem::new(
            vec![EventSpec::new("a", 60, 0.5)],
            h,
            EmotionState::neutral(),
        );
        assert_eq!(p.start_range(&p.events[0]), 0..=2);
        let w = EventSpec::new("b", 60, 0.5).window(Some(1), Some(5));
        assert_eq!(p.start_range(&w), 1..=2);
        let long = EventSpec::new("c", 150, 0.5);
        assert!(p.start_range(&long).is_empty());
    }

    #[test]
    fn problem_document_roundtrip() {
        let doc = r#"{
            "events": [{"id": "a", "duration_min": 60, "priority": 0.9}],
            "horizon": {"day_start": "09:00", "day_end": "11:00", "slot_minutes": 30},
            "weights": {"alpha_temporal": 2.0, "alpha_cognitive": 1.0, "alpha_emotional": 0.5}
        }"#;
        let p: Problem = serde_json::from_str(doc).unwrap();
        assert_eq!(p.horizon.slot_count(), 4);
        assert_eq!(p.weights.temporal, 2.0);
        assert_eq!(p.thresholds, ConstraintThresholds::default());
        assert_eq!(p.emotion, EmotionState::neutral());
        let again: Problem = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(again, p);
    }
}
