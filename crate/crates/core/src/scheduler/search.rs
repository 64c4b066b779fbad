//! Branch-and-bound backtracking with forward checking.

use super::constraints::check_c3;
use super::objective::emotional_term;
use super::{improves, tie_key, InfeasibleReason, Problem, Schedule, SchedulerError};
use crate::domain::ScheduledEvent;

/// Finds the feasible schedule with the lowest objective.
///
/// Events are assigned in descending priority (then id), start slots in
/// ascending order. Each assignment prunes the remaining domains by C1 and
/// C2; C3 is checked on complete assignments and C4 before the search since
/// it does not depend on placement. A branch is cut when its lower bound
/// exceeds the incumbent. Ties between equal objectives go to the schedule
/// whose starts, read in event-id order, are lexicographically smallest.
pub fn solve(problem: &Problem) -> Result<Schedule, SchedulerError> {
    problem.validate()?;
    problem.precheck()?;

    let n = problem.events.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&problem.events[a], &problem.events[b]);
        eb.priority
            .total_cmp(&ea.priority)
            .then_with(|| ea.id.cmp(&eb.id))
    });
    let lens: Vec<u32> = problem
        .events
        .iter()
        .map(|e| problem.horizon.slots_for(e.duration_min))
        .collect();
    let mut remaining_len = vec![0u32; n + 1];
    for d in (0..n).rev() {
        remaining_len[d] = remaining_len[d + 1] + lens[order[d]];
    }
    let domains: Vec<Vec<u32>> = order
        .iter()
        .map(|&i| problem.start_range(&problem.events[i]).collect())
        .collect();

    let mut search = Search {
        problem,
        order,
        lens,
        remaining_len,
        fixed_bound: fixed_lower_bound(problem),
        slot_count: problem.horizon.slot_count(),
        starts: vec![0; n],
        best: None,
        nodes: 0,
    };
    search.descend(0, &domains)?;
    log::debug!("branch and bound visited {} nodes", search.nodes);
    search
        .best
        .map(|b| b.schedule)
        .ok_or(SchedulerError::Infeasible(
            InfeasibleReason::NoFeasibleAssignment,
        ))
}

/// Placement-independent part of the bound: the emotional term is constant,
/// every consecutive pair costs at least the cheapest pair, and extras
/// contribute their declared floors.
fn fixed_lower_bound(problem: &Problem) -> f64 {
    let w = &problem.weights;
    let loads: Vec<f64> = problem.events.iter().map(|e| e.cognitive_load).collect();
    let mut min_pair = f64::INFINITY;
    for i in 0..loads.len() {
        for j in i + 1..loads.len() {
            min_pair = min_pair.min(loads[i] * loads[j]);
        }
    }
    let cognitive = if loads.len() < 2 { 0.0 } else { min_pair };
    let mut bound = w.cognitive * cognitive + w.emotional * emotional_term(problem);
    for extra in w.extras.iter().filter(|e| e.weight > 0.0) {
        bound += extra.weight * extra.scorer.lower_bound(problem);
    }
    bound
}

struct Incumbent {
    objective: f64,
    key: Vec<u32>,
    schedule: Schedule,
}

struct Search<'a> {
    problem: &'a Problem,
    /// Event indices in assignment order.
    order: Vec<usize>,
    /// Slot length per event index.
    lens: Vec<u32>,
    /// `remaining_len[d]`: total slots of events at depth `d` and deeper.
    remaining_len: Vec<u32>,
    fixed_bound: f64,
    slot_count: u32,
    /// Start slot per event index; valid for depths already assigned.
    starts: Vec<u32>,
    best: Option<Incumbent>,
    nodes: u64,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, domains: &[Vec<u32>]) -> Result<(), SchedulerError> {
        let event = self.order[depth];
        for &slot in &domains[depth] {
            self.nodes += 1;
            self.starts[event] = slot;
            if depth + 1 == self.order.len() {
                self.leaf()?;
                continue;
            }
            if self.pruned(depth) {
                continue;
            }
            if let Some(next) = self.forward_check(depth, slot, domains) {
                self.descend(depth + 1, &next)?;
            }
        }
        Ok(())
    }

    fn placements(&self, upto: usize) -> Vec<ScheduledEvent> {
        self.order[..=upto]
            .iter()
            .map(|&i| {
                ScheduledEvent::new(
                    self.problem.events[i].clone(),
                    self.starts[i],
                    &self.problem.horizon,
                )
            })
            .collect()
    }

    fn leaf(&mut self) -> Result<(), SchedulerError> {
        let placements = self.placements(self.order.len() - 1);
        if !check_c3(&placements, &self.problem.emotion, &self.problem.thresholds).is_empty() {
            return Ok(());
        }
        let key = tie_key(&placements);
        let starts: Vec<(usize, u32)> = self.order.iter().map(|&i| (i, self.starts[i])).collect();
        let schedule = Schedule::from_starts(self.problem, &starts)?;
        let incumbent = self.best.as_ref().map(|b| (b.objective, b.key.as_slice()));
        if improves(schedule.objective, &key, incumbent) {
            self.best = Some(Incumbent {
                objective: schedule.objective,
                key,
                schedule,
            });
        }
        Ok(())
    }

    /// Lower bound of any completion of depths `0..=depth` against the incumbent.
    fn pruned(&self, depth: usize) -> bool {
        let Some(best) = &self.best else {
            return false;
        };
        let mut intervals: Vec<(u32, u32)> = self.order[..=depth]
            .iter()
            .map(|&i| (self.starts[i], self.starts[i] + self.lens[i]))
            .collect();
        intervals.sort_unstable();
        let idle = idle_of(&intervals);
        let fillable = self.remaining_len[depth + 1];
        let temporal = idle.saturating_sub(fillable) as f64 / self.slot_count as f64;
        let bound = self.fixed_bound + self.problem.weights.temporal * temporal;
        // Bounds and objectives are summed in different orders; the slack keeps
        // rounding from cutting an equal-objective branch.
        bound > best.objective + 1e-9 * best.objective.abs().max(1.0)
    }

    /// Domains of deeper events after placing `order[depth]` at `slot`.
    fn forward_check(
        &self,
        depth: usize,
        slot: u32,
        domains: &[Vec<u32>],
    ) -> Option<Vec<Vec<u32>>> {
        let placed = &self.problem.events[self.order[depth]];
        let placed_end = slot + self.lens[self.order[depth]];
        let mut next = domains.to_vec();
        for (&e, domain) in self.order.iter().zip(next.iter_mut()).skip(depth + 1) {
            let other = &self.problem.events[e];
            let len = self.lens[e];
            let shares = placed.multitask && other.multitask;
            domain.retain(|&s| {
                let c1 = shares || s + len <= slot || placed_end <= s;
                let c2 = if placed.priority > other.priority {
                    s >= slot
                } else if other.priority > placed.priority {
                    s <= slot
                } else {
                    true
                };
                c1 && c2
            });
            if domain.is_empty() {
                return None;
            }
        }
        Some(next)
    }
}

fn idle_of(sorted: &[(u32, u32)]) -> u32 {
    let Some(&(_, mut reach)) = sorted.first() else {
        return 0;
    };
    let mut idle = 0;
    for &(start, end) in &sorted[1..] {
        if start > reach {
            idle += start - reach;
        }
        reach = reach.max(end);
    }
    idle
}
