use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FixedAssignments, Instance, ResourceId, Schedule, TaskId, Time};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Precedence,
    Capacity,
    FixedStart,
    Horizon,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Precedence => "precedence",
            ViolationKind::Capacity => "capacity",
            ViolationKind::FixedStart => "fixed-start",
            ViolationKind::Horizon => "horizon",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub task: Option<TaskId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub resource: Option<ResourceId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub time: Option<Time>,
}

impl Violation {
    fn new(kind: ViolationKind, detail: impl Into<String>) -> Self {
        Self {
            kind,
            detail: detail.into(),
            task: None,
            resource: None,
            time: None,
        }
    }

    fn task(mut self, task: TaskId) -> Self {
        self.task = Some(task);
        self
    }

    fn resource(mut self, resource: ResourceId) -> Self {
        self.resource = Some(resource);
        self
    }

    fn time(mut self, time: Time) -> Self {
        self.time = Some(time);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

/// Diagnostics from [`validate_instance`] or [`check_schedule`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub fn of_kind(&self, kind: ViolationKind) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(move |v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the structural invariants of an instance.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut out = Vec::new();
    let end = inst.end_task();

    for &(j, s) in inst.precedences() {
        if j > end || s > end {
            out.push(
                Violation::new(
                    ViolationKind::Precedence,
                    format!("precedence ({j},{s}) names a missing task"),
                )
                .task(j.min(s)),
            );
        } else if j == s {
            out.push(Violation::new(ViolationKind::Precedence, format!("task {j} precedes itself")).task(j));
        } else if s == 0 {
            out.push(
                Violation::new(
                    ViolationKind::Precedence,
                    format!("dummy start task 0 has predecessor {j}"),
                )
                .task(0),
            );
        } else if j == end {
            out.push(
                Violation::new(
                    ViolationKind::Precedence,
                    format!("dummy end task {end} has successor {s}"),
                )
                .task(end),
            );
        }
    }

    let well_formed = out.is_empty();
    let cp = if well_formed { inst.critical_path_length() } else { None };
    if well_formed && cp.is_none() {
        let cycle = cycle_members(inst);
        out.push(
            Violation::new(
                ViolationKind::Precedence,
                format!("precedence cycle through tasks {cycle:?}"),
            )
            .task(cycle[0]),
        );
    }

    for (r, res) in inst.resources().iter().enumerate() {
        if res.capacity == 0 {
            out.push(
                Violation::new(
                    ViolationKind::Capacity,
                    format!("resource {} has zero capacity", res.id),
                )
                .resource(res.id),
            );
        }
        for j in 0..inst.task_count() {
            let need = inst.requirement(j, r);
            if need > res.capacity {
                out.push(
                    Violation::new(
                        ViolationKind::Capacity,
                        format!(
                            "task {j} needs {need} of resource {} but capacity is {}",
                            res.id, res.capacity
                        ),
                    )
                    .task(j)
                    .resource(res.id),
                );
            }
        }
    }

    if inst.horizon() == 0 {
        out.push(Violation::new(ViolationKind::Horizon, "horizon must be positive"));
    }
    if let Some(cp) = cp {
        if cp > inst.horizon() {
            out.push(
                Violation::new(
                    ViolationKind::Horizon,
                    format!("horizon {} is shorter than the critical path {cp}", inst.horizon()),
                )
                .time(inst.horizon()),
            );
        }
    }

    ValidationReport::from_violations(out)
}

/// Tasks that remain after repeatedly peeling sources and sinks; all of them
/// sit on or between cycles.
fn cycle_members(inst: &Instance) -> Vec<TaskId> {
    let n = inst.task_count();
    let succ = inst.successor_lists();
    let pred = inst.predecessor_lists();
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for j in 0..n {
            if !alive[j] {
                continue;
            }
            let has_in = pred[j].iter().any(|&i| alive[i]);
            let has_out = succ[j].iter().any(|&s| alive[s]);
            if !has_in || !has_out {
                alive[j] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&j| alive[j]).collect()
}

/// Checks a schedule against precedence, capacity, fixed-start and horizon
/// constraints.
pub fn check_schedule(inst: &Instance, sched: &Schedule, fixed: &FixedAssignments) -> ValidationReport {
    let mut out = Vec::new();
    if sched.task_count() != inst.task_count() {
        out.push(Violation::new(
            ViolationKind::Horizon,
            format!(
                "schedule covers {} tasks, instance has {}",
                sched.task_count(),
                inst.task_count()
            ),
        ));
        return ValidationReport::from_violations(out);
    }

    if sched.start(0) != 0 {
        out.push(
            Violation::new(
                ViolationKind::FixedStart,
                format!("dummy start task begins at {}", sched.start(0)),
            )
            .task(0)
            .time(sched.start(0)),
        );
    }

    for (j, s) in inst.full_precedences() {
        if j >= inst.task_count() || s >= inst.task_count() {
            continue;
        }
        let finish = sched.start(j) as u64 + inst.duration(j) as u64;
        if (sched.start(s) as u64) < finish {
            out.push(
                Violation::new(
                    ViolationKind::Precedence,
                    format!(
                        "task {s} starts at {} before predecessor {j} finishes at {finish}",
                        sched.start(s)
                    ),
                )
                .task(s)
                .time(sched.start(s)),
            );
        }
    }

    // Difference-array sweep per resource.
    let last = (0..inst.task_count())
        .map(|j| sched.start(j) as usize + inst.duration(j) as usize)
        .max()
        .unwrap_or(0);
    for (r, res) in inst.resources().iter().enumerate() {
        let mut delta = vec![0i64; last + 1];
        for j in 0..inst.task_count() {
            let need = inst.requirement(j, r) as i64;
            if need == 0 || inst.duration(j) == 0 {
                continue;
            }
            let s = sched.start(j) as usize;
            delta[s] += need;
            delta[s + inst.duration(j) as usize] -= need;
        }
        let mut load = 0i64;
        for (t, d) in delta.iter().enumerate().take(last) {
            load += d;
            if load > res.capacity as i64 {
                out.push(
                    Violation::new(
                        ViolationKind::Capacity,
                        format!(
                            "resource {} carries {load} at time {t}, capacity {}",
                            res.id, res.capacity
                        ),
                    )
                    .resource(res.id)
                    .time(t as Time),
                );
            }
        }
    }

    for (task, start) in fixed.iter() {
        if task >= inst.task_count() {
            out.push(Violation::new(ViolationKind::FixedStart, format!("fixed task {task} does not exist")).task(task));
        } else if sched.start(task) != start {
            out.push(
                Violation::new(
                    ViolationKind::FixedStart,
                    format!("task {task} starts at {} but is fixed at {start}", sched.start(task)),
                )
                .task(task)
                .time(sched.start(task)),
            );
        }
    }

    for j in 0..inst.task_count() {
        let finish = sched.start(j) as u64 + inst.duration(j) as u64;
        if finish > inst.horizon() as u64 {
            out.push(
                Violation::new(
                    ViolationKind::Horizon,
                    format!("task {j} finishes at {finish}, past horizon {}", inst.horizon()),
                )
                .task(j)
                .time(sched.start(j)),
            );
        }
    }

    ValidationReport::from_violations(out)
}
