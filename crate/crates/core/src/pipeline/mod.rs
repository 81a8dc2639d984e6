//! Request-to-schedule pipeline: interpretation, preprocessing, re-solve
//! and explanation.

mod explain;
mod preprocess;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::intent::{
    interpret_intention, IntentConfig, Interpretation, InterpretationStatus, RescheduleRequest, Responder,
};
use crate::model::{Instance, Schedule};
use crate::solver::{solve, SolveConfig, SolveStatus};

pub use explain::{explain, start_deltas, Explanation, IntentSummary, OutcomeSummary, PreprocessSummary, StartDelta};
pub use preprocess::{
    build_successor_map, check_resource_feasibility, check_total_conflicts, preprocess, propagate_flexibility,
    FixReason, FixScope, FixedEntry, InfeasibleReason, ModifiedInstance, PreprocessConfig, PreprocessError,
    PreprocessOutcome, ResourceChange, TargetChange,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RescheduleStatus {
    Ok,
    InvalidRequest,
    InteractionTimeout,
    Infeasible,
    SolverTimeout,
}

impl fmt::Display for RescheduleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RescheduleStatus::Ok => "ok",
            RescheduleStatus::InvalidRequest => "invalid-request",
            RescheduleStatus::InteractionTimeout => "interaction-timeout",
            RescheduleStatus::Infeasible => "infeasible",
            RescheduleStatus::SolverTimeout => "solver-timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RescheduleResult {
    pub status: RescheduleStatus,
    pub schedule: Option<Schedule>,
    pub explanation: Explanation,
}

#[derive(Debug, Clone, Default)]
pub struct DispatchConfig {
    pub intent: IntentConfig,
    pub solve: SolveConfig,
    pub preprocess: PreprocessConfig,
}

/// Interprets the request with `responder`, then finishes the pipeline.
pub fn dispatch(
    inst: &Instance,
    baseline: &Schedule,
    req: &RescheduleRequest,
    responder: &mut dyn Responder,
    cfg: &DispatchConfig,
) -> RescheduleResult {
    let interpretation = interpret_intention(baseline, inst, req, responder, &cfg.intent);
    complete(inst, baseline, req, &interpretation, cfg)
}

/// Everything after interpretation: preprocessing, the solve with fixed
/// tasks, and the explanation. Bridges and demand changes live only in the
/// modified instance; `inst` is left untouched.
pub fn complete(
    inst: &Instance,
    baseline: &Schedule,
    req: &RescheduleRequest,
    interpretation: &Interpretation,
    cfg: &DispatchConfig,
) -> RescheduleResult {
    let fail = |status: RescheduleStatus, modified: Option<&ModifiedInstance>, reason: String, detail: String| {
        RescheduleResult {
            status,
            schedule: None,
            explanation: explain(
                req,
                interpretation,
                status,
                modified,
                OutcomeSummary::Failed { reason, detail },
            ),
        }
    };
    let gamma = match (interpretation.status, interpretation.request_type) {
        (InterpretationStatus::Resolved, Some(gamma)) => gamma,
        (InterpretationStatus::TimedOut, _) => {
            return fail(
                RescheduleStatus::InteractionTimeout,
                None,
                "timeout".into(),
                String::new(),
            );
        }
        _ => {
            let atom = interpretation
                .facts
                .iter()
                .rev()
                .find(|f| f.starts_with("result("))
                .cloned()
                .unwrap_or_default();
            return fail(RescheduleStatus::InvalidRequest, None, atom, String::new());
        }
    };
    let (b1, b2) = interpretation.intent.pair(gamma);
    let change = TargetChange {
        task: req.task,
        start: req.desired_start,
        resources: req.changed_resources(inst),
    };
    let modified = match preprocess(inst, baseline, &change, gamma, b1, b2, &cfg.preprocess) {
        Ok(PreprocessOutcome::Modified(m)) => m,
        Ok(PreprocessOutcome::Infeasible { reason, detail }) => {
            return fail(RescheduleStatus::Infeasible, None, reason.to_string(), detail);
        }
        Err(e) => {
            return fail(
                RescheduleStatus::InvalidRequest,
                None,
                "preprocess".into(),
                e.to_string(),
            )
        }
    };
    let solved = match solve(&modified.instance, &modified.fixed, &cfg.solve) {
        Ok(r) => r,
        Err(e) => {
            return fail(
                RescheduleStatus::InvalidRequest,
                Some(&modified),
                "solver-input".into(),
                e.to_string(),
            );
        }
    };
    match (solved.status, solved.schedule) {
        (SolveStatus::Optimal, Some(schedule)) => {
            let outcome = OutcomeSummary::Scheduled {
                makespan_before: baseline.makespan(),
                makespan_after: schedule.makespan(),
                deltas: start_deltas(inst, baseline, &schedule),
            };
            RescheduleResult {
                status: RescheduleStatus::Ok,
                explanation: explain(req, interpretation, RescheduleStatus::Ok, Some(&modified), outcome),
                schedule: Some(schedule),
            }
        }
        (SolveStatus::Timeout, _) => fail(
            RescheduleStatus::SolverTimeout,
            Some(&modified),
            "solver-timeout".into(),
            format!("search stopped after {} nodes", solved.nodes_explored),
        ),
        _ => fail(
            RescheduleStatus::Infeasible,
            Some(&modified),
            "no-feasible-schedule".into(),
            "no schedule satisfies the fixed tasks within the horizon".into(),
        ),
    }
}
