use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::intent::{IntentLabel, IntentVector, Interpretation, InterpretationStatus, RequestType, RescheduleRequest};
use crate::model::{Instance, Schedule, TaskId, Time};

use super::preprocess::{FixReason, FixedEntry, ModifiedInstance, ResourceChange};
use super::RescheduleStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentSummary {
    pub label: Option<IntentLabel>,
    pub vector: IntentVector,
    pub facts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub requirement_changes: Vec<ResourceChange>,
    pub removed_edges: Vec<(TaskId, TaskId)>,
    pub added_edges: Vec<(TaskId, TaskId)>,
    pub conflicts: Vec<TaskId>,
    pub flexible: Vec<TaskId>,
    pub fixed: Vec<FixedEntry>,
    pub rejected_fixes: Vec<TaskId>,
}

impl From<&ModifiedInstance> for PreprocessSummary {
    fn from(m: &ModifiedInstance) -> Self {
        Self {
            requirement_changes: m.requirement_changes.clone(),
            removed_edges: m.removed_edges.clone(),
            added_edges: m.added_edges.clone(),
            conflicts: m.conflicts.iter().copied().collect(),
            flexible: m.flexible.iter().copied().collect(),
            fixed: m.fixed_entries.clone(),
            rejected_fixes: m.rejected_fixes.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartDelta {
    pub task: TaskId,
    pub before: Time,
    pub after: Time,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutcomeSummary {
    Scheduled {
        makespan_before: Time,
        makespan_after: Time,
        /// Real tasks whose start changed.
        deltas: Vec<StartDelta>,
    },
    Failed {
        reason: String,
        detail: String,
    },
}

/// Everything needed to justify a reschedule result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub request: RescheduleRequest,
    pub request_type: Option<RequestType>,
    pub validity: Vec<String>,
    pub intent: IntentSummary,
    pub transcript: String,
    pub preprocessing: Option<PreprocessSummary>,
    pub outcome: OutcomeSummary,
    pub narrative: String,
}

/// Start changes of real tasks between two schedules of the same instance.
pub fn start_deltas(inst: &Instance, before: &Schedule, after: &Schedule) -> Vec<StartDelta> {
    inst.real_tasks()
        .filter(|&j| before.start(j) != after.start(j))
        .map(|j| StartDelta {
            task: j,
            before: before.start(j),
            after: after.start(j),
            delta: after.start(j) as i64 - before.start(j) as i64,
        })
        .collect()
}

/// Assembles the explanation for a terminal pipeline state.
pub fn explain(
    request: &RescheduleRequest,
    interpretation: &Interpretation,
    status: RescheduleStatus,
    modified: Option<&ModifiedInstance>,
    outcome: OutcomeSummary,
) -> Explanation {
    let validity = interpretation
        .validity
        .as_ref()
        .map(|v| v.atoms.clone())
        .unwrap_or_default();
    let narrative = narrative(request, interpretation, status, modified, &outcome);
    Explanation {
        request: request.clone(),
        request_type: interpretation.request_type,
        validity,
        intent: IntentSummary {
            label: interpretation.label.clone(),
            vector: interpretation.intent,
            facts: interpretation.facts.clone(),
        },
        transcript: interpretation.transcript.clone(),
        preprocessing: modified.map(PreprocessSummary::from),
        outcome,
        narrative,
    }
}

fn narrative(
    request: &RescheduleRequest,
    interpretation: &Interpretation,
    status: RescheduleStatus,
    modified: Option<&ModifiedInstance>,
    outcome: &OutcomeSummary,
) -> String {
    match interpretation.status {
        InterpretationStatus::Invalid => {
            return interpretation
                .facts
                .iter()
                .rev()
                .find(|f| f.starts_with("result("))
                .cloned()
                .unwrap_or_default();
        }
        InterpretationStatus::TimedOut => return "timeout".to_string(),
        InterpretationStatus::Resolved => {}
    }
    let mut out = String::new();
    if let Some(label) = &interpretation.label {
        let _ = writeln!(out, "Request for task {} resolved to intent {label}.", request.task);
    }
    if let Some(m) = modified {
        for c in &m.requirement_changes {
            let _ = writeln!(
                out,
                "Task {} now uses {} unit(s) of resource {} instead of {}.",
                request.task, c.to, c.resource, c.from
            );
        }
        if !m.removed_edges.is_empty() {
            let _ = writeln!(
                out,
                "Removed precedences {:?}; added bridges {:?}.",
                m.removed_edges, m.added_edges
            );
        }
        if !m.conflicts.is_empty() {
            let _ = writeln!(
                out,
                "Resource conflicts with tasks {:?}.",
                m.conflicts.iter().collect::<Vec<_>>()
            );
        }
        for e in &m.fixed_entries {
            match e.reason {
                FixReason::Target => {
                    let _ = writeln!(out, "Fixed task {} at {}.", e.task, e.start);
                }
                FixReason::Baseline => {
                    let _ = writeln!(out, "Kept task {} at its baseline start {}.", e.task, e.start);
                }
            }
        }
    }
    match outcome {
        OutcomeSummary::Scheduled {
            makespan_before,
            makespan_after,
            deltas,
        } => {
            let _ = writeln!(out, "Makespan {makespan_before} -> {makespan_after}.");
            for d in deltas {
                let _ = writeln!(
                    out,
                    "Task {} moves from {} to {} ({:+}).",
                    d.task, d.before, d.after, d.delta
                );
            }
        }
        OutcomeSummary::Failed { reason, detail } => {
            let _ = writeln!(out, "{status}: {reason}. {detail}");
        }
    }
    out
}
