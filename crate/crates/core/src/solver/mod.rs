//! Exact makespan minimization for the time-indexed RCPSP with optional
//! fixed start times.
//!
//! [`solve`] is a depth-first branch-and-bound over active schedules;
//! [`brute_force_solve`] enumerates start vectors exhaustively and serves as
//! an oracle on small instances. Both return, among all optimal schedules,
//! the lexicographically smallest start vector in task-id order.

mod bound;
mod brute;
mod search;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{check_schedule, validate_instance, Instance, Schedule};

pub use crate::model::FixedAssignments;
pub use bound::critical_path_lower_bound;
pub use brute::{brute_force_solve, BRUTE_FORCE_MAX_HORIZON, BRUTE_FORCE_MAX_TASKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// The optimum when `status` is optimal, the best incumbent (if any) on
    /// timeout, `None` when infeasible.
    pub schedule: Option<Schedule>,
    pub nodes_explored: u64,
    pub elapsed: Duration,
}

impl SolveResult {
    pub fn makespan(&self) -> Option<u32> {
        self.schedule.as_ref().map(Schedule::makespan)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Search limits. `None` means unlimited.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolveConfig {
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
}

impl SolveConfig {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn with_node_limit(mut self, nodes: u64) -> Self {
        assert!(nodes > 0, "node limit must be positive");
        self.node_limit = Some(nodes);
        self
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        assert!(!limit.is_zero(), "time limit must be positive");
        self.time_limit = Some(limit);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("instance exceeds the brute-force guard rail: {0}")]
    OutsideGuardRail(String),
}

fn check_preconditions(inst: &Instance, fixed: &FixedAssignments) -> Result<(), SolveError> {
    let report = validate_instance(inst);
    if !report.ok {
        return Err(SolveError::Malformed(report.to_string()));
    }
    fixed.check_against(inst).map_err(SolveError::Malformed)
}

/// Minimizes the makespan subject to precedence, capacity, horizon and the
/// given fixed starts.
pub fn solve(inst: &Instance, fixed: &FixedAssignments, cfg: &SolveConfig) -> Result<SolveResult, SolveError> {
    check_preconditions(inst, fixed)?;
    let started = Instant::now();
    let outcome = search::Search::new(inst, fixed, cfg, started).run();
    let status = match (&outcome.best, outcome.aborted) {
        (_, true) => SolveStatus::Timeout,
        (Some(_), false) => SolveStatus::Optimal,
        (None, false) => SolveStatus::Infeasible,
    };
    let schedule = outcome.best.map(Schedule::new);
    if let Some(s) = &schedule {
        debug_assert!(check_schedule(inst, s, fixed).ok, "solver produced an invalid schedule");
    }
    Ok(SolveResult {
        status,
        schedule,
        nodes_explored: outcome.nodes,
        elapsed: started.elapsed(),
    })
}
