use std::time::Instant;

use crate::model::{check_schedule, FixedAssignments, Instance, Schedule, TaskId, Time};

use super::{check_preconditions, SolveError, SolveResult, SolveStatus};

pub const BRUTE_FORCE_MAX_TASKS: usize = 7;
pub const BRUTE_FORCE_MAX_HORIZON: Time = 20;

/// Exhaustive enumeration of start vectors in lexicographic order.
///
/// Real task `j` ranges over `0..=H-p_j` (or its fixed time). Partial vectors
/// that already break a precedence or capacity constraint among assigned
/// tasks are dropped, as are those whose finish already reaches the best
/// makespan found. Accepted vectors are confirmed with [`check_schedule`].
pub fn brute_force_solve(inst: &Instance, fixed: &FixedAssignments) -> Result<SolveResult, SolveError> {
    if inst.real_task_count() > BRUTE_FORCE_MAX_TASKS || inst.horizon() > BRUTE_FORCE_MAX_HORIZON {
        return Err(SolveError::OutsideGuardRail(format!(
            "{} real tasks, horizon {} (limits {BRUTE_FORCE_MAX_TASKS} and {BRUTE_FORCE_MAX_HORIZON})",
            inst.real_task_count(),
            inst.horizon()
        )));
    }
    check_preconditions(inst, fixed)?;
    let started = Instant::now();
    let mut e = Enumerator {
        inst,
        fixed,
        starts: vec![0; inst.task_count()],
        load: vec![vec![0; inst.horizon() as usize]; inst.resources().len()],
        best: None,
        leaves: 0,
    };
    e.assign(1, 0);
    let schedule = e.best.map(Schedule::new);
    Ok(SolveResult {
        status: if schedule.is_some() {
            SolveStatus::Optimal
        } else {
            SolveStatus::Infeasible
        },
        schedule,
        nodes_explored: e.leaves,
        elapsed: started.elapsed(),
    })
}

struct Enumerator<'a> {
    inst: &'a Instance,
    fixed: &'a FixedAssignments,
    starts: Vec<Time>,
    load: Vec<Vec<u32>>,
    best: Option<Vec<Time>>,
    leaves: u64,
}

impl Enumerator<'_> {
    fn best_makespan(&self) -> Option<Time> {
        self.best.as_ref().map(|s| *s.last().unwrap())
    }

    fn assign(&mut self, j: TaskId, finish_so_far: Time) {
        let end = self.inst.end_task();
        if j == end {
            self.leaves += 1;
            let makespan = match self.fixed.get(end) {
                Some(t) if t < finish_so_far => return,
                Some(t) => t,
                None => finish_so_far,
            };
            if self.best_makespan().is_some_and(|b| makespan >= b) {
                return;
            }
            self.starts[end] = makespan;
            let candidate = Schedule::new(self.starts.clone());
            if check_schedule(self.inst, &candidate, self.fixed).ok {
                self.best = Some(self.starts.clone());
            }
            return;
        }
        let p = self.inst.duration(j);
        let h = self.inst.horizon();
        let (lo, hi) = match self.fixed.get(j) {
            Some(t) => (t, t),
            None => (0, h - p),
        };
        for t in lo..=hi {
            let finish = finish_so_far.max(t + p);
            if self.best_makespan().is_some_and(|b| finish >= b) {
                break;
            }
            if !self.consistent(j, t) {
                continue;
            }
            self.starts[j] = t;
            self.add(j, t, true);
            if self.capacity_ok(j, t) {
                self.assign(j + 1, finish);
            }
            self.add(j, t, false);
        }
    }

    /// Precedences between `j` at `t` and the already assigned tasks `1..j`.
    fn consistent(&self, j: TaskId, t: Time) -> bool {
        self.inst.precedences().iter().all(|&(a, b)| {
            if a == j && b < j {
                self.starts[b] >= t + self.inst.duration(j)
            } else if b == j && a < j {
                t >= self.starts[a] + self.inst.duration(a)
            } else {
                true
            }
        })
    }

    fn add(&mut self, j: TaskId, t: Time, on: bool) {
        for (r, &u) in self.inst.requirement_row(j).iter().enumerate() {
            for step in t..t + self.inst.duration(j) {
                let cell = &mut self.load[r][step as usize];
                if on {
                    *cell += u;
                } else {
                    *cell -= u;
                }
            }
        }
    }

    fn capacity_ok(&self, j: TaskId, t: Time) -> bool {
        (t..t + self.inst.duration(j)).all(|step| {
            self.inst
                .resources()
                .iter()
                .enumerate()
                .all(|(r, res)| self.load[r][step as usize] <= res.capacity)
        })
    }
}
