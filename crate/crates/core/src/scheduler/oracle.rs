//! Exhaustive reference solver.

use super::constraints::{check_c1, check_c2, check_c3, check_c4};
use super::{improves, tie_key, InfeasibleReason, Problem, Schedule, SchedulerError};
use crate::domain::ScheduledEvent;
use crate::par;

pub const MAX_ORACLE_EVENTS: usize = 7;
pub const MAX_ORACLE_SLOTS: u32 = 20;

/// Enumerates every start-slot assignment, keeps those passing C1–C4, and
/// returns the minimum-objective one with the same tie-break as [`super::solve`].
///
/// Events are enumerated in input order. A partial assignment is abandoned
/// only when one of its already-placed pairs fails C1 or C2, which no later
/// choice can repair; no objective-based pruning is done. The first event's
/// slots are split across threads.
pub fn brute_force_solve(problem: &Problem) -> Result<Schedule, SchedulerError> {
    problem.validate()?;
    let slots = problem.horizon.slot_count();
    if problem.events.len() > MAX_ORACLE_EVENTS || slots > MAX_ORACLE_SLOTS {
        return Err(SchedulerError::InstanceTooLarge {
            events: problem.events.len(),
            slots,
        });
    }

    let domains: Vec<Vec<u32>> = problem
        .events
        .iter()
        .map(|e| problem.start_range(e).collect())
        .collect();

    let branches = par::map(&domains[0], |&first| {
        let mut walk = Walk {
            problem,
            domains: &domains,
            placed: Vec::with_capacity(problem.events.len()),
            best: None,
        };
        walk.push(0, first);
        walk.best
    });

    let mut best: Option<(f64, Vec<u32>, Vec<ScheduledEvent>)> = None;
    for (obj, key, placements) in branches.into_iter().flatten() {
        if improves(obj, &key, best.as_ref().map(|(o, k, _)| (*o, k.as_slice()))) {
            best = Some((obj, key, placements));
        }
    }
    let (_, _, placements) = best.ok_or(SchedulerError::Infeasible(
        InfeasibleReason::NoFeasibleAssignment,
    ))?;
    let starts: Vec<(usize, u32)> = placements
        .iter()
        .map(|p| {
            let i = problem
                .events
                .iter()
                .position(|e| e.id == p.event.id)
                .unwrap();
            (i, p.start_slot)
        })
        .collect();
    Schedule::from_starts(problem, &starts)
}

type Candidate = (f64, Vec<u32>, Vec<ScheduledEvent>);

struct Walk<'a> {
    problem: &'a Problem,
    domains: &'a [Vec<u32>],
    placed: Vec<ScheduledEvent>,
    best: Option<Candidate>,
}

impl Walk<'_> {
    fn push(&mut self, index: usize, slot: u32) {
        let candidate = ScheduledEvent::new(
            self.problem.events[index].clone(),
            slot,
            &self.problem.horizon,
        );
        let consistent = self
            .placed
            .iter()
            .all(|p| check_c1(p, &candidate) && check_c2(p, &candidate) && check_c2(&candidate, p));
        if !consistent {
            return;
        }
        self.placed.push(candidate);
        if index + 1 == self.problem.events.len() {
            self.complete();
        } else {
            for &next in &self.domains[index + 1] {
                self.push(index + 1, next);
            }
        }
        self.placed.pop();
    }

    fn complete(&mut self) {
        let (emotion, th) = (&self.problem.emotion, &self.problem.thresholds);
        if !check_c3(&self.placed, emotion, th).is_empty()
            || !check_c4(&self.placed, emotion, th).is_empty()
        {
            return;
        }
        let (obj, _) = super::evaluate_objective(&self.placed, self.problem)
            .expect("complete assignment is non-empty");
        let key = tie_key(&self.placed);
        let incumbent = self.best.as_ref().map(|(o, k, _)| (*o, k.as_slice()));
        if improves(obj, &key, incumbent) {
            self.best = Some((obj, key, self.placed.clone()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{EmotionState, EventSpec, Horizon, WallTime};
    use crate::scheduler::{solve, ObjectiveWeights};

    #[test]
    fn single_event_goes_earliest_under_pure_temporal() {
        let h = Horizon::new(WallTime::hm(9, 0), WallTime::hm(10, 30), 30).unwrap();
        let p = Problem::new(
            vec![EventSpec::new("a", 30, 0.5)],
            h,
            EmotionState::neutral(),
        )
        .with_weights(ObjectiveWeights::new(1.0, 0.0, 0.0));
        let s = brute_force_solve(&p).unwrap();
        assert_eq!(s.placements[0].start_slot, 0);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let p = Problem::new(
            (0..8)
                .map(|i| EventSpec::new(format!("e{i}"), 30, 0.5))
                .collect(),
            Horizon::default(),
            EmotionState::neutral(),
        );
        assert_eq!(
            brute_force_solve(&p),
            Err(SchedulerError::InstanceTooLarge {
                events: 8,
                slots: 18
            })
        );
        let fine = Problem::new(
            vec![EventSpec::new("a", 30, 0.5)],
            Horizon::new(WallTime::hm(8, 0), WallTime::hm(19, 0), 30).unwrap(),
            EmotionState::neutral(),
        );
        assert!(matches!(
            brute_force_solve(&fine),
            Err(SchedulerError::InstanceTooLarge {
                events: 1,
                slots: 22
            })
        ));
    }

    #[test]
    fn two_event_example_enumerates_nine_assignments() {
        let h = Horizon::new(WallTime::hm(9, 0), WallTime::hm(11, 0), 30).unwrap();
        let p = Problem::new(
            vec![EventSpec::new("A", 60, 0.9), EventSpec::new("B", 60, 0.1)],
            h,
            EmotionState::neutral(),
        );
        let starts: Vec<u32> = p.start_range(&p.events[0]).collect();
        assert_eq!(starts.len() * starts.len(), 9);
        let s = brute_force_solve(&p).unwrap();
        assert_eq!(s.tie_key(), vec![0, 2]);
        assert_eq!(s, solve(&p).unwrap());
    }

    #[test]
    fn infeasible_when_every_assignment_violates() {
        // Both stressed pacing and priority force H2 straight after H with no
        // room for a break in a two-hour day.
        let h = Horizon::new(WallTime::hm(9, 0), WallTime::hm(11, 0), 30).unwrap();
        let p = Problem::new(
            vec![
                EventSpec::new("H", 60, 0.9).load(0.9),
                EventSpec::new("H2", 60, 0.5).load(0.9),
            ],
            h,
            EmotionState::new(0.6, 0.9, 0.5).unwrap(),
        );
        let expected = Err(SchedulerError::Infeasible(
            InfeasibleReason::NoFeasibleAssignment,
        ));
        assert_eq!(brute_force_solve(&p), expected);
        assert_eq!(solve(&p), expected);
    }
}
