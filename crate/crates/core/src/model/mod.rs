//! Time-indexed RCPSP domain model.
//!
//! Tasks are dense indices `0..=n+1`. Task `0` is the dummy start and task
//! `n+1` the dummy end; both have zero duration and zero demand. Explicit
//! precedences only ever connect real tasks. The dummy edges `(0, j)` and
//! `(j, n+1)` are implicit for every real task `j`, which keeps every task on
//! a path from the start dummy to the end dummy.

mod format;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use format::{parse_instance, serialize_instance, Format, ParseError};
pub use validate::{check_schedule, validate_instance, ValidationReport, Violation, ViolationKind};

/// Index of a task, `0..=n+1`.
pub type TaskId = usize;
/// Discrete time in unit steps.
pub type Time = u32;
/// External (1-based) resource identifier.
pub type ResourceId = u32;

/// A renewable resource with a per-step capacity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resource {
    pub id: ResourceId,
    pub capacity: u32,
}

/// An RCPSP instance. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    durations: Vec<Time>,
    /// `requirements[task][resource_index]`
    requirements: Vec<Vec<u32>>,
    resources: Vec<Resource>,
    precedences: BTreeSet<(TaskId, TaskId)>,
    horizon: Time,
}

impl Instance {
    /// Starts a builder for an instance with the given resources.
    pub fn builder(resources: Vec<Resource>) -> InstanceBuilder {
        InstanceBuilder {
            resources,
            tasks: Vec::new(),
            precedences: Vec::new(),
            horizon: None,
        }
    }

    /// Number of real (non-dummy) tasks.
    pub fn real_task_count(&self) -> usize {
        self.durations.len() - 2
    }

    /// Number of tasks including both dummies.
    pub fn task_count(&self) -> usize {
        self.durations.len()
    }

    pub fn start_task(&self) -> TaskId {
        0
    }

    pub fn end_task(&self) -> TaskId {
        self.durations.len() - 1
    }

    /// Real task ids, `1..=n`.
    pub fn real_tasks(&self) -> std::ops::RangeInclusive<TaskId> {
        1..=self.real_task_count()
    }

    pub fn is_real_task(&self, task: TaskId) -> bool {
        task >= 1 && task <= self.real_task_count()
    }

    pub fn contains_task(&self, task: TaskId) -> bool {
        task < self.task_count()
    }

    pub fn duration(&self, task: TaskId) -> Time {
        self.durations[task]
    }

    pub fn durations(&self) -> &[Time] {
        &self.durations
    }

    /// Demand of `task` on the resource at position `resource_index`.
    pub fn requirement(&self, task: TaskId, resource_index: usize) -> u32 {
        self.requirements[task][resource_index]
    }

    /// Demand row of a task, one entry per resource in [`Instance::resources`] order.
    pub fn requirement_row(&self, task: TaskId) -> &[u32] {
        &self.requirements[task]
    }

    pub fn requirements(&self) -> &[Vec<u32>] {
        &self.requirements
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn resource_index(&self, id: ResourceId) -> Option<usize> {
        self.resources.iter().position(|r| r.id == id)
    }

    pub fn capacity(&self, resource_index: usize) -> u32 {
        self.resources[resource_index].capacity
    }

    pub fn horizon(&self) -> Time {
        self.horizon
    }

    /// Sum of all durations, the serial-schedule length.
    pub fn total_duration(&self) -> Time {
        self.durations.iter().sum()
    }

    /// Explicit precedence pairs `(j, s)`: `j` must finish before `s` starts.
    pub fn precedences(&self) -> &BTreeSet<(TaskId, TaskId)> {
        &self.precedences
    }

    /// Explicit precedences plus the implicit dummy edges for every real task.
    pub fn full_precedences(&self) -> BTreeSet<(TaskId, TaskId)> {
        let end = self.end_task();
        let mut all = self.precedences.clone();
        if self.real_task_count() == 0 {
            all.insert((0, end));
        }
        for j in self.real_tasks() {
            all.insert((0, j));
            all.insert((j, end));
        }
        all
    }

    /// Successor lists over [`Instance::full_precedences`]. Out-of-range
    /// endpoints are skipped.
    pub fn successor_lists(&self) -> Vec<Vec<TaskId>> {
        let mut succ = vec![Vec::new(); self.task_count()];
        for (j, s) in self.full_precedences() {
            if j < self.task_count() && s < self.task_count() {
                succ[j].push(s);
            }
        }
        succ
    }

    /// Predecessor lists over [`Instance::full_precedences`].
    pub fn predecessor_lists(&self) -> Vec<Vec<TaskId>> {
        let mut pred = vec![Vec::new(); self.task_count()];
        for (j, s) in self.full_precedences() {
            if j < self.task_count() && s < self.task_count() {
                pred[s].push(j);
            }
        }
        pred
    }

    /// Topological order of all tasks (ties broken by smallest id), or
    /// `None` when the precedence graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<TaskId>> {
        let succ = self.successor_lists();
        let mut indegree = vec![0usize; self.task_count()];
        for list in &succ {
            for &s in list {
                indegree[s] += 1;
            }
        }
        let mut ready: BTreeSet<TaskId> = (0..self.task_count()).filter(|&j| indegree[j] == 0).collect();
        let mut order = Vec::with_capacity(self.task_count());
        while let Some(j) = ready.pop_first() {
            order.push(j);
            for &s in &succ[j] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.insert(s);
                }
            }
        }
        (order.len() == self.task_count()).then_some(order)
    }

    /// Length of the longest duration-weighted path from task 0 to task
    /// `n+1`, or `None` on a cycle.
    pub fn critical_path_length(&self) -> Option<Time> {
        let order = self.topological_order()?;
        let succ = self.successor_lists();
        let mut earliest = vec![0 as Time; self.task_count()];
        for &j in &order {
            for &s in &succ[j] {
                earliest[s] = earliest[s].max(earliest[j] + self.durations[j]);
            }
        }
        Some(earliest[self.end_task()])
    }

    /// Copy of this instance with a different explicit precedence set.
    pub fn with_precedences(&self, precedences: BTreeSet<(TaskId, TaskId)>) -> Instance {
        let mut next = self.clone();
        next.precedences = normalize_precedences(precedences, self.end_task());
        next
    }

    pub fn with_horizon(&self, horizon: Time) -> Instance {
        let mut next = self.clone();
        next.horizon = horizon;
        next
    }

    /// Copy of this instance with one task's demand row replaced.
    pub fn with_requirement_row(&self, task: TaskId, row: Vec<u32>) -> Instance {
        assert_eq!(row.len(), self.resources.len(), "requirement row width");
        let mut next = self.clone();
        next.requirements[task] = row;
        next
    }
}

fn normalize_precedences(edges: impl IntoIterator<Item = (TaskId, TaskId)>, end: TaskId) -> BTreeSet<(TaskId, TaskId)> {
    edges
        .into_iter()
        .filter(|&(j, s)| !(j == 0 && s <= end) && !(s == end && j <= end))
        .collect()
}

/// A real task handed to [`InstanceBuilder`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub duration: Time,
    /// Demand per resource id; missing resources mean zero demand.
    pub requirements: BTreeMap<ResourceId, u32>,
}

/// Builder for [`Instance`]. Real tasks are numbered `1..=n` in insertion
/// order; the dummies are added automatically.
#[derive(Debug, Clone)]
pub struct InstanceBuilder {
    resources: Vec<Resource>,
    tasks: Vec<TaskSpec>,
    precedences: Vec<(TaskId, TaskId)>,
    horizon: Option<Time>,
}

/// Errors raised while assembling an instance.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("task {task} requires unknown resource {resource}")]
    UnknownResource { task: TaskId, resource: ResourceId },
    #[error("duplicate resource id {0}")]
    DuplicateResource(ResourceId),
}

impl InstanceBuilder {
    /// Adds a real task and returns its id.
    pub fn task(&mut self, duration: Time, requirements: impl IntoIterator<Item = (ResourceId, u32)>) -> TaskId {
        self.tasks.push(TaskSpec {
            duration,
            requirements: requirements.into_iter().collect(),
        });
        self.tasks.len()
    }

    /// Adds a precedence `before -> after` between task ids.
    pub fn precedence(&mut self, before: TaskId, after: TaskId) -> &mut Self {
        self.precedences.push((before, after));
        self
    }

    pub fn horizon(&mut self, horizon: Time) -> &mut Self {
        self.horizon = Some(horizon);
        self
    }

    /// Builds the instance. Only structural errors are raised here; the
    /// semantic invariants are reported by [`validate_instance`].
    pub fn build(&self) -> Result<Instance, BuildError> {
        let mut seen = BTreeSet::new();
        for r in &self.resources {
            if !seen.insert(r.id) {
                return Err(BuildError::DuplicateResource(r.id));
            }
        }
        let n = self.tasks.len();
        let m = self.resources.len();
        let mut durations = Vec::with_capacity(n + 2);
        let mut requirements = Vec::with_capacity(n + 2);
        durations.push(0);
        requirements.push(vec![0; m]);
        for (k, draft) in self.tasks.iter().enumerate() {
            let mut row = vec![0; m];
            for (&rid, &amount) in &draft.requirements {
                let idx = self
                    .resources
                    .iter()
                    .position(|r| r.id == rid)
                    .ok_or(BuildError::UnknownResource {
                        task: k + 1,
                        resource: rid,
                    })?;
                row[idx] = amount;
            }
            durations.push(draft.duration);
            requirements.push(row);
        }
        durations.push(0);
        requirements.push(vec![0; m]);
        let total: Time = durations.iter().sum();
        Ok(Instance {
            durations,
            requirements,
            resources: self.resources.clone(),
            precedences: normalize_precedences(self.precedences.iter().copied(), n + 1),
            horizon: self.horizon.unwrap_or(total.max(1)),
        })
    }
}

/// Mandated start times for a subset of tasks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FixedAssignments {
    entries: BTreeMap<TaskId, Time>,
}

impl FixedAssignments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: TaskId, start: Time) -> Option<Time> {
        self.entries.insert(task, start)
    }

    pub fn remove(&mut self, task: TaskId) -> Option<Time> {
        self.entries.remove(&task)
    }

    pub fn get(&self, task: TaskId) -> Option<Time> {
        self.entries.get(&task).copied()
    }

    pub fn contains(&self, task: TaskId) -> bool {
        self.entries.contains_key(&task)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, Time)> + '_ {
        self.entries.iter().map(|(&j, &t)| (j, t))
    }

    /// Checks that every entry names a task and fits inside the horizon.
    pub fn check_against(&self, inst: &Instance) -> Result<(), String> {
        for (task, start) in self.iter() {
            if !inst.contains_task(task) {
                return Err(format!("fixed task {task} does not exist"));
            }
            if task == inst.start_task() && start != 0 {
                return Err(format!("dummy start task must start at 0, got {start}"));
            }
            if start + inst.duration(task) > inst.horizon() {
                return Err(format!(
                    "fixed start {start} of task {task} exceeds horizon {}",
                    inst.horizon()
                ));
            }
        }
        Ok(())
    }
}

impl FromIterator<(TaskId, Time)> for FixedAssignments {
    fn from_iter<I: IntoIterator<Item = (TaskId, Time)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Start time for every task. The makespan is the start of the end dummy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ScheduleDoc", into = "ScheduleDoc")]
pub struct Schedule {
    starts: Vec<Time>,
}

impl Schedule {
    /// Wraps a start vector covering tasks `0..=n+1`.
    pub fn new(starts: Vec<Time>) -> Self {
        assert!(starts.len() >= 2, "a schedule covers at least both dummies");
        Self { starts }
    }

    pub fn start(&self, task: TaskId) -> Time {
        self.starts[task]
    }

    pub fn starts(&self) -> &[Time] {
        &self.starts
    }

    pub fn makespan(&self) -> Time {
        *self.starts.last().expect("non-empty schedule")
    }

    pub fn task_count(&self) -> usize {
        self.starts.len()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDoc {
    starts: Vec<Time>,
    makespan: Time,
}

impl From<Schedule> for ScheduleDoc {
    fn from(s: Schedule) -> Self {
        let makespan = s.makespan();
        ScheduleDoc {
            starts: s.starts,
            makespan,
        }
    }
}

impl TryFrom<ScheduleDoc> for Schedule {
    type Error = String;

    fn try_from(doc: ScheduleDoc) -> Result<Self, Self::Error> {
        if doc.starts.len() < 2 {
            return Err("schedule must cover both dummy tasks".into());
        }
        let s = Schedule { starts: doc.starts };
        if s.makespan() != doc.makespan {
            return Err(format!(
                "makespan {} disagrees with end-task start {}",
                doc.makespan,
                s.makespan()
            ));
        }
        Ok(s)
    }
}
