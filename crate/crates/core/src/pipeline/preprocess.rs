//! Constraint and parameter surgery ahead of the re-solve.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::intent::{RequestType, TriState};
use crate::model::{FixedAssignments, Instance, ResourceId, Schedule, TaskId, Time};

/// Which tasks the local-scope step may pin to their baseline starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixScope {
    /// Original predecessors of the target only.
    #[default]
    Predecessors,
    /// Every real task outside the flexible set.
    AllNonflex,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub fix_scope: FixScope,
}

/// The single-task change being applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetChange {
    pub task: TaskId,
    pub start: Time,
    /// New demand per resource id; unlisted resources keep theirs.
    pub resources: Vec<(ResourceId, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixReason {
    /// The requested task at its requested start.
    Target,
    /// Kept at its baseline start by the local-scope step.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedEntry {
    pub task: TaskId,
    pub start: Time,
    pub reason: FixReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceChange {
    pub resource: ResourceId,
    pub from: u32,
    pub to: u32,
}

/// Revised instance plus the record of how it was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifiedInstance {
    /// The base instance with `S′` and `u′` applied.
    pub instance: Instance,
    pub fixed: FixedAssignments,
    pub fixed_entries: Vec<FixedEntry>,
    pub requirement_changes: Vec<ResourceChange>,
    pub removed_edges: Vec<(TaskId, TaskId)>,
    /// Bridges not already present in the base precedences.
    pub added_edges: Vec<(TaskId, TaskId)>,
    pub conflicts: BTreeSet<TaskId>,
    pub flexible: BTreeSet<TaskId>,
    /// Tasks tried for baseline fixing and dropped for lack of capacity.
    pub rejected_fixes: Vec<TaskId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfeasibleReason {
    PredecessorFinish,
    FixedSetResources,
    /// The target would finish after the horizon.
    Horizon,
}

impl fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfeasibleReason::PredecessorFinish => "predecessor-finish",
            InfeasibleReason::FixedSetResources => "fixed-set-resources",
            InfeasibleReason::Horizon => "horizon",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PreprocessOutcome {
    Modified(Box<ModifiedInstance>),
    Infeasible { reason: InfeasibleReason, detail: String },
}

impl PreprocessOutcome {
    pub fn modified(&self) -> Option<&ModifiedInstance> {
        match self {
            PreprocessOutcome::Modified(m) => Some(m),
            PreprocessOutcome::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreprocessError {
    #[error("intent flags must be decided before preprocessing")]
    Undecided,
    #[error("task {0} is not a real task")]
    UnknownTask(TaskId),
    #[error("resource {0} does not exist")]
    UnknownResource(ResourceId),
    #[error("baseline covers {got} tasks, instance has {want}")]
    BaselineSize { got: usize, want: usize },
}

/// `map[j]` lists the successors of `j` for every task `0..task_count`.
pub fn build_successor_map(precedences: &BTreeSet<(TaskId, TaskId)>, task_count: usize) -> Vec<BTreeSet<TaskId>> {
    let mut map = vec![BTreeSet::new(); task_count];
    for &(j, k) in precedences {
        if j < task_count {
            map[j].insert(k);
        }
    }
    map
}

/// Tasks other than `task` that are active during an overloaded step of
/// `[start, start + p)` and demand the overloaded resource. Demand comes
/// from `inst` (already carrying `u′`); other tasks sit at baseline starts.
pub fn check_total_conflicts(task: TaskId, start: Time, inst: &Instance, baseline: &Schedule) -> BTreeSet<TaskId> {
    let mut conflicts = BTreeSet::new();
    let p = inst.duration(task);
    for (r, res) in inst.resources().iter().enumerate() {
        if inst.requirement(task, r) == 0 {
            continue;
        }
        for step in start..start + p {
            let active: Vec<TaskId> = inst
                .real_tasks()
                .filter(|&j| j != task && inst.requirement(j, r) > 0)
                .filter(|&j| baseline.start(j) <= step && step < baseline.start(j) + inst.duration(j))
                .collect();
            let load: u32 = inst.requirement(task, r) + active.iter().map(|&j| inst.requirement(j, r)).sum::<u32>();
            if load > res.capacity {
                conflicts.extend(active);
            }
        }
    }
    conflicts
}

/// `conflicts` together with all their transitive successors.
pub fn propagate_flexibility(conflicts: &BTreeSet<TaskId>, succ_map: &[BTreeSet<TaskId>]) -> BTreeSet<TaskId> {
    let mut flex = conflicts.clone();
    let mut stack: Vec<TaskId> = conflicts.iter().copied().collect();
    while let Some(j) = stack.pop() {
        for &k in succ_map.get(j).into_iter().flatten() {
            if flex.insert(k) {
                stack.push(k);
            }
        }
    }
    flex
}

/// Whether the fixed tasks alone respect every capacity at every step.
pub fn check_resource_feasibility(fixed: &FixedAssignments, inst: &Instance) -> bool {
    let span = fixed
        .iter()
        .filter(|&(j, _)| inst.contains_task(j))
        .map(|(j, t)| t + inst.duration(j))
        .max()
        .unwrap_or(0) as usize;
    for (r, res) in inst.resources().iter().enumerate() {
        let mut load = vec![0u32; span];
        for (j, t) in fixed.iter().filter(|&(j, _)| inst.contains_task(j)) {
            let u = inst.requirement(j, r);
            if u == 0 {
                continue;
            }
            for cell in &mut load[t as usize..(t + inst.duration(j)) as usize] {
                *cell += u;
                if *cell > res.capacity {
                    return false;
                }
            }
        }
    }
    true
}

fn decided(flag: TriState) -> Result<bool, PreprocessError> {
    flag.to_bool().ok_or(PreprocessError::Undecided)
}

/// Applies the request to the base instance and picks the fixed set.
///
/// `b1` is the scope flag (true lets other tasks move freely), `b2` the
/// precedence flag (false detaches the target from its neighbours and
/// bridges predecessors to successors).
pub fn preprocess(
    inst: &Instance,
    baseline: &Schedule,
    change: &TargetChange,
    gamma: RequestType,
    b1: TriState,
    b2: TriState,
    cfg: &PreprocessConfig,
) -> Result<PreprocessOutcome, PreprocessError> {
    let b1 = decided(b1)?;
    let b2 = decided(b2)?;
    let t_star = change.task;
    if !inst.is_real_task(t_star) {
        return Err(PreprocessError::UnknownTask(t_star));
    }
    if baseline.task_count() != inst.task_count() {
        return Err(PreprocessError::BaselineSize {
            got: baseline.task_count(),
            want: inst.task_count(),
        });
    }

    // (1) u′
    let mut requirement_changes = Vec::new();
    let mut working = inst.clone();
    if gamma == RequestType::Resource {
        let mut row = inst.requirement_row(t_star).to_vec();
        for &(rid, amount) in &change.resources {
            let r = inst.resource_index(rid).ok_or(PreprocessError::UnknownResource(rid))?;
            if row[r] != amount {
                requirement_changes.push(ResourceChange {
                    resource: rid,
                    from: row[r],
                    to: amount,
                });
            }
            row[r] = amount;
        }
        working = working.with_requirement_row(t_star, row);
    }

    // (2) S′
    let original = inst.precedences();
    let preds: Vec<TaskId> = original
        .iter()
        .filter(|&&(_, k)| k == t_star)
        .map(|&(i, _)| i)
        .collect();
    let succs: Vec<TaskId> = original
        .iter()
        .filter(|&&(j, _)| j == t_star)
        .map(|&(_, k)| k)
        .collect();
    let mut revised = original.clone();
    let mut removed_edges = Vec::new();
    let mut added_edges = Vec::new();
    if !b2 {
        revised.retain(|&(i, k)| {
            let incident = i == t_star || k == t_star;
            if incident {
                removed_edges.push((i, k));
            }
            !incident
        });
        for &i in &preds {
            for &k in &succs {
                if revised.insert((i, k)) && !original.contains(&(i, k)) {
                    added_edges.push((i, k));
                }
            }
        }
        working = working.with_precedences(revised.clone());
    }

    // (3) earliest finish of predecessors still linked to t*
    let s_min = preds
        .iter()
        .filter(|&&i| revised.contains(&(i, t_star)))
        .map(|&i| baseline.start(i) + inst.duration(i))
        .max()
        .unwrap_or(0);
    if change.start < s_min {
        return Ok(PreprocessOutcome::Infeasible {
            reason: InfeasibleReason::PredecessorFinish,
            detail: format!(
                "task {t_star} cannot start at {} before its predecessors finish at {s_min}",
                change.start
            ),
        });
    }
    let finish = change.start + inst.duration(t_star);
    if finish > inst.horizon() {
        return Ok(PreprocessOutcome::Infeasible {
            reason: InfeasibleReason::Horizon,
            detail: format!(
                "task {t_star} at {} would finish at {finish}, past the horizon {}",
                change.start,
                inst.horizon()
            ),
        });
    }

    // (4)
    let mut fixed = FixedAssignments::new();
    fixed.insert(t_star, change.start);
    let mut fixed_entries = vec![FixedEntry {
        task: t_star,
        start: change.start,
        reason: FixReason::Target,
    }];

    // (5)
    let conflicts = check_total_conflicts(t_star, change.start, &working, baseline);
    let succ_map = build_successor_map(&revised, inst.task_count());
    let mut flexible = propagate_flexibility(&conflicts, &succ_map);

    // (6)
    let mut rejected_fixes = Vec::new();
    if !b1 {
        let candidates: Vec<TaskId> = match cfg.fix_scope {
            FixScope::Predecessors => {
                let mut p = preds.clone();
                p.sort_unstable();
                p
            }
            FixScope::AllNonflex => {
                // Successors of the moved task cannot keep their baseline
                // starts either.
                let seed: BTreeSet<TaskId> = [t_star].into();
                flexible.extend(propagate_flexibility(&seed, &succ_map));
                flexible.remove(&t_star);
                inst.real_tasks().filter(|&j| j != t_star).collect()
            }
        };
        for i in candidates.into_iter().filter(|i| !flexible.contains(i)) {
            fixed.insert(i, baseline.start(i));
            if check_resource_feasibility(&fixed, &working) {
                fixed_entries.push(FixedEntry {
                    task: i,
                    start: baseline.start(i),
                    reason: FixReason::Baseline,
                });
            } else {
                fixed.remove(i);
                rejected_fixes.push(i);
            }
        }
    }

    // (7)
    if !check_resource_feasibility(&fixed, &working) {
        return Ok(PreprocessOutcome::Infeasible {
            reason: InfeasibleReason::FixedSetResources,
            detail: format!("fixed set {:?} overloads a resource", fixed.iter().collect::<Vec<_>>()),
        });
    }

    Ok(PreprocessOutcome::Modified(Box::new(ModifiedInstance {
        instance: working,
        fixed,
        fixed_entries,
        requirement_changes,
        removed_edges,
        added_edges,
        conflicts,
        flexible,
        rejected_fixes,
    })))
}
