use serde::{Deserialize, Serialize};

use super::{ConstraintThresholds, Problem};
use crate::domain::{EmotionState, EventId, ScheduledEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// C1: temporal exclusivity.
    TemporalExclusivity,
    /// C2: priority sequencing.
    PrioritySequencing,
    /// C3: emotional regulation (pacing under stress).
    EmotionalRegulation,
    /// C4: emotional compatibility (no sensitive events when upset).
    EmotionalCompatibility,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintKind,
    pub first: EventId,
    pub second: Option<EventId>,
}

/// C1: the pair may share time only if both events are multitaskable.
pub fn check_c1(a: &ScheduledEvent, b: &ScheduledEvent) -> bool {
    (a.event.multitask && b.event.multitask)
        || a.end_slot <= b.start_slot
        || b.end_slot <= a.start_slot
}

/// C2: if `a` has strictly higher priority than `b`, it does not start later.
pub fn check_c2(a: &ScheduledEvent, b: &ScheduledEvent) -> bool {
    !(a.event.priority > b.event.priority) || a.start_slot <= b.start_slot
}

/// Stressed and negative: arousal at or above the stress threshold with valence below 0.5.
pub fn is_stressed_and_negative(emotion: &EmotionState, th: &ConstraintThresholds) -> bool {
    emotion.arousal >= th.t_stress && emotion.valence < 0.5
}

/// C3: under stress, the event starting next after each demanding event must
/// be low-demand or leave a break of `break_slots`.
pub fn check_c3(
    placements: &[ScheduledEvent],
    emotion: &EmotionState,
    th: &ConstraintThresholds,
) -> Vec<Violation> {
    if emotion.arousal < th.t_stress {
        return Vec::new();
    }
    let mut out = Vec::new();
    for high in placements
        .iter()
        .filter(|p| p.event.cognitive_load >= th.c_high)
    {
        let next = placements
            .iter()
            .filter(|p| p.start_slot >= high.end_slot)
            .min_by(|a, b| {
                a.start_slot
                    .cmp(&b.start_slot)
                    .then_with(|| a.event.id.cmp(&b.event.id))
            });
        if let Some(next) = next {
            let low_demand = next.event.cognitive_load <= th.c_low;
            let rested = next.start_slot >= high.end_slot + th.break_slots;
            if !(low_demand || rested) {
                out.push(Violation {
                    constraint: ConstraintKind::EmotionalRegulation,
                    first: high.event.id.clone(),
                    second: Some(next.event.id.clone()),
                });
            }
        }
    }
    out
}

/// C4: no sensitive events while stressed with negative valence.
pub fn check_c4(
    placements: &[ScheduledEvent],
    emotion: &EmotionState,
    th: &ConstraintThresholds,
) -> Vec<Violation> {
    if !is_stressed_and_negative(emotion, th) {
        return Vec::new();
    }
    placements
        .iter()
        .filter(|p| p.event.sensitive)
        .map(|p| Violation {
            constraint: ConstraintKind::EmotionalCompatibility,
            first: p.event.id.clone(),
            second: None,
        })
        .collect()
}

/// Every C1–C4 violation of a full schedule.
pub fn violations(placements: &[ScheduledEvent], problem: &Problem) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, a) in placements.iter().enumerate() {
        for b in &placements[i + 1..] {
            if !check_c1(a, b) {
                out.push(Violation {
                    constraint: ConstraintKind::TemporalExclusivity,
                    first: a.event.id.clone(),
                    second: Some(b.event.id.clone()),
                });
            }
            for (x, y) in [(a, b), (b, a)] {
                if !check_c2(x, y) {
                    out.push(Violation {
                        constraint: ConstraintKind::PrioritySequencing,
                        first: x.event.id.clone(),
                        second: Some(y.event.id.clone()),
                    });
                }
            }
        }
    }
    out.extend(check_c3(placements, &problem.emotion, &problem.thresholds));
    out.extend(check_c4(placements, &problem.emotion, &problem.thresholds));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EventSpec, Horizon};

    fn at(id: &str, start: u32, slots: u32, priority: f64) -> ScheduledEvent {
        let h = Horizon::default();
        ScheduledEvent::new(EventSpec::new(id, slots * 30, priority), start, &h)
    }

    fn with_load(mut p: ScheduledEvent, load: f64) -> ScheduledEvent {
        p.event.cognitive_load = load;
        p
    }

    fn stressed(arousal: f64, valence: f64) -> EmotionState {
        EmotionState::new(valence, arousal, 0.5).unwrap()
    }

    #[test]
    fn c1_cases() {
        assert!(!check_c1(&at("a", 0, 2, 0.5), &at("b", 1, 2, 0.5)));
        assert!(check_c1(&at("a", 0, 2, 0.5), &at("b", 2, 2, 0.5)));
        let mut a = at("a", 0, 2, 0.5);
        let mut b = at("b", 0, 2, 0.5);
        a.event.multitask = true;
        assert!(!check_c1(&a, &b), "one multitask event is not enough");
        b.event.multitask = true;
        assert!(check_c1(&a, &b));
    }

    #[test]
    fn c2_cases() {
        assert!(check_c2(&at("a", 0, 1, 0.9), &at("b", 4, 1, 0.1)));
        assert!(!check_c2(&at("a", 4, 1, 0.9), &at("b", 0, 1, 0.1)));
        assert!(check_c2(&at("a", 4, 1, 0.5), &at("b", 0, 1, 0.5)));
        assert!(check_c2(&at("a", 0, 1, 0.5), &at("b", 4, 1, 0.5)));
    }

    #[test]
    fn c3_cases() {
        let th = ConstraintThresholds::default();
        let high_then_low = [
            with_load(at("h", 0, 2, 0.5), 0.9),
            with_load(at("l", 2, 1, 0.5), 0.1),
        ];
        assert!(check_c3(&high_then_low, &stressed(0.9, 0.5), &th).is_empty());

        let both_high = [
            with_load(at("h1", 0, 2, 0.5), 0.9),
            with_load(at("h2", 2, 2, 0.5), 0.9),
        ];
        let v = check_c3(&both_high, &stressed(0.9, 0.5), &th);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].first, EventId::from("h1"));
        assert_eq!(v[0].second, Some(EventId::from("h2")));

        // a one-slot gap is a break
        let with_break = [
            with_load(at("h1", 0, 2, 0.5), 0.9),
            with_load(at("h2", 3, 2, 0.5), 0.9),
        ];
        assert!(check_c3(&with_break, &stressed(0.9, 0.5), &th).is_empty());

        assert!(check_c3(&both_high, &stressed(0.1, 0.5), &th).is_empty());
    }

    #[test]
    fn c3_thresholds_are_inclusive() {
        let th = ConstraintThresholds::default();
        let pair = [
            with_load(at("h", 0, 1, 0.5), th.c_high),
            with_load(at("m", 1, 1, 0.5), th.c_low),
        ];
        assert!(check_c3(&pair, &stressed(th.t_stress, 0.5), &th).is_empty());
        let pair = [
            with_load(at("h", 0, 1, 0.5), th.c_high),
            with_load(at("m", 1, 1, 0.5), th.c_low + 0.01),
        ];
        assert_eq!(check_c3(&pair, &stressed(th.t_stress, 0.5), &th).len(), 1);
    }

    #[test]
    fn c4_cases() {
        let th = ConstraintThresholds::default();
        let mut s = at("s", 0, 1, 0.5);
        s.event.sensitive = true;
        let ps = [s, at("n", 1, 1, 0.5)];
        assert_eq!(check_c4(&ps, &stressed(0.9, 0.2), &th).len(), 1);
        assert!(check_c4(&ps, &stressed(0.9, 0.8), &th).is_empty());
        assert!(check_c4(&ps, &stressed(0.2, 0.2), &th).is_empty());
    }
}
