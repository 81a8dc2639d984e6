//! The bundled ten-task vertiport instance.
//!
//! Durations, demands and successors are fixed; resource capacities are not
//! part of the source data, so they were chosen by [`search_capacities`]: the
//! pinned vector puts task 4 at start 5 in the optimal baseline and yields
//! makespan 21 after the task-4 case-study reschedule.

use crate::model::{FixedAssignments, Instance, Resource, ResourceId, TaskId, Time};
use crate::solver::{solve, SolveConfig, SolveStatus};

/// `(duration, [R1, R2, R3], successors)` for tasks 1..=10.
const TASKS: [(Time, [u32; 3], &[TaskId]); 10] = [
    (5, [3, 3, 0], &[3]),
    (4, [3, 0, 2], &[3]),
    (1, [0, 0, 2], &[]),
    (3, [2, 0, 3], &[5, 6]),
    (4, [0, 3, 0], &[]),
    (3, [2, 1, 0], &[]),
    (1, [0, 0, 3], &[8]),
    (4, [1, 0, 2], &[]),
    (5, [2, 0, 0], &[10]),
    (3, [0, 3, 0], &[]),
];

pub const FIXTURE_HORIZON: Time = 35;

/// Capacities `(C1, C2, C3)` pinned by the capacity search.
pub const FIXTURE_CAPACITIES: [u32; 3] = include!("../fixtures/capacities.in");

/// Target task and request of the case study.
pub const CASE_TASK: TaskId = 4;
pub const CASE_START: Time = 4;
pub const CASE_RESOURCE: ResourceId = 1;
pub const CASE_AMOUNT: u32 = 1;

/// The instance with arbitrary capacities.
pub fn instance_with_capacities(capacities: [u32; 3], horizon: Time) -> Instance {
    let resources = capacities
        .iter()
        .enumerate()
        .map(|(r, &capacity)| Resource {
            id: r as ResourceId + 1,
            capacity,
        })
        .collect();
    let mut b = Instance::builder(resources);
    for (duration, req, _) in TASKS {
        b.task(
            duration,
            req.iter()
                .enumerate()
                .filter(|(_, &u)| u > 0)
                .map(|(r, &u)| (r as ResourceId + 1, u)),
        );
    }
    for (k, (_, _, succ)) in TASKS.iter().enumerate() {
        for &s in succ.iter() {
            b.precedence(k + 1, s);
        }
    }
    b.horizon(horizon);
    b.build().expect("fixture instance builds")
}

/// The pinned fixture instance.
pub fn instance() -> Instance {
    instance_with_capacities(FIXTURE_CAPACITIES, FIXTURE_HORIZON)
}

/// The fixture as a native-format document.
pub fn native_document() -> &'static str {
    include_str!("../fixtures/vertiport.json")
}

/// Case-study instance: task 4 demands one unit of R1, precedences kept.
pub fn case_study_instance(base: &Instance) -> Instance {
    let mut row = base.requirement_row(CASE_TASK).to_vec();
    row[base.resource_index(CASE_RESOURCE).expect("R1 exists")] = CASE_AMOUNT;
    base.with_requirement_row(CASE_TASK, row)
}

/// Outcome of evaluating one capacity vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CapacityCandidate {
    pub capacities: [u32; 3],
    pub baseline_task4_start: Option<Time>,
    pub baseline_makespan: Option<Time>,
    pub rescheduled_makespan: Option<Time>,
}

impl CapacityCandidate {
    pub fn matches(&self) -> bool {
        self.baseline_task4_start == Some(5) && self.rescheduled_makespan == Some(21)
    }

    /// Distance to the targets, `0` for an exact match.
    pub fn gap(&self) -> u32 {
        let start_gap = self.baseline_task4_start.map_or(100, |t| t.abs_diff(5));
        let span_gap = self.rescheduled_makespan.map_or(100, |m| m.abs_diff(21));
        start_gap + span_gap
    }
}

/// Evaluates every `C ∈ {3,4,5,6}³` in lexicographic order.
pub fn search_capacities() -> Vec<CapacityCandidate> {
    let mut out = Vec::new();
    for c1 in 3..=6 {
        for c2 in 3..=6 {
            for c3 in 3..=6 {
                out.push(evaluate_capacities([c1, c2, c3]));
            }
        }
    }
    out
}

pub fn evaluate_capacities(capacities: [u32; 3]) -> CapacityCandidate {
    let base = instance_with_capacities(capacities, FIXTURE_HORIZON);
    let cfg = SolveConfig::default();
    let baseline = solve(&base, &FixedAssignments::new(), &cfg).expect("fixture is well formed");
    let case = case_study_instance(&base);
    let fixed: FixedAssignments = [(CASE_TASK, CASE_START)].into_iter().collect();
    let resched = solve(&case, &fixed, &cfg).expect("fixture is well formed");
    let optimal =
        |r: &crate::solver::SolveResult| (r.status == SolveStatus::Optimal).then(|| r.schedule.clone()).flatten();
    let b = optimal(&baseline);
    CapacityCandidate {
        capacities,
        baseline_task4_start: b.as_ref().map(|s| s.start(CASE_TASK)),
        baseline_makespan: b.as_ref().map(|s| s.makespan()),
        rescheduled_makespan: optimal(&resched).map(|s| s.makespan()),
    }
}
