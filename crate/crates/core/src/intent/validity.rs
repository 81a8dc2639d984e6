//! Validity rules for start-time and resource-amount requests.
//!
//! The verdict mirrors the rule bodies: a time request is `invalid_task`
//! only when its time is valid and `invalid_time` only when its task is
//! valid. When both fail no result rule fires; the verdict then falls back
//! to `invalid_task` so every input gets exactly one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Instance, ResourceId, TaskId, Time};

use super::{RequestType, RescheduleRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ValidRequest,
    InvalidTask,
    InvalidTime,
    InvalidResource,
    InvalidAmount,
}

impl Verdict {
    pub fn atom(self) -> String {
        format!("result({self})")
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ValidRequest => "valid_request",
            Verdict::InvalidTask => "invalid_task",
            Verdict::InvalidTime => "invalid_time",
            Verdict::InvalidResource => "invalid_resource",
            Verdict::InvalidAmount => "invalid_amount",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityResult {
    pub verdict: Verdict,
    /// Derived facts, request atoms first.
    pub atoms: Vec<String>,
}

impl ValidityResult {
    pub fn is_valid(&self) -> bool {
        self.verdict == Verdict::ValidRequest
    }

    /// `request(..)` and `result(..)` atoms joined by spaces.
    pub fn summary(&self) -> String {
        self.atoms
            .iter()
            .filter(|a| a.starts_with("request(") || a.starts_with("result("))
            .cloned()
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// `valid_task` iff the task is real; `valid_time` iff `time ≤ Σ p_j`.
pub fn validate_time_request(inst: &Instance, task: TaskId, time: Time) -> ValidityResult {
    let total_dur = inst.total_duration();
    let valid_task = inst.is_real_task(task);
    let valid_time = time <= total_dur;
    let mut atoms = vec![format!("request({task},{time})"), format!("total_dur({total_dur})")];
    if valid_task {
        atoms.push("valid_task".into());
    }
    if valid_time {
        atoms.push("valid_time".into());
    }
    let verdict = match (valid_task, valid_time) {
        (true, true) => Verdict::ValidRequest,
        (false, true) => Verdict::InvalidTask,
        (true, false) => Verdict::InvalidTime,
        (false, false) => Verdict::InvalidTask,
    };
    atoms.push(verdict.atom());
    ValidityResult { verdict, atoms }
}

/// `valid_resource` iff some task demands the resource; `valid_amount` iff
/// the amount does not exceed the largest existing demand on it.
pub fn validate_resource_request(inst: &Instance, task: TaskId, resource: ResourceId, amount: u32) -> ValidityResult {
    let valid_task = inst.is_real_task(task);
    let limit = inst.resource_index(resource).and_then(|r| {
        (0..inst.task_count())
            .map(|j| inst.requirement(j, r))
            .filter(|&a| a > 0)
            .max()
    });
    let valid_resource = limit.is_some();
    let valid_amount = limit.is_some_and(|l| amount <= l);

    let mut atoms = vec![format!("request({task},{resource},{amount})")];
    if let Some(l) = limit {
        atoms.push(format!("limit({resource},{l})"));
    }
    let mut results = Vec::new();
    if valid_task {
        atoms.push("valid_task".into());
    } else {
        results.push(Verdict::InvalidTask);
    }
    if valid_resource {
        atoms.push("valid_resource".into());
    } else {
        results.push(Verdict::InvalidResource);
    }
    if valid_amount {
        atoms.push("valid_amount".into());
    } else {
        results.push(Verdict::InvalidAmount);
    }
    if results.is_empty() {
        results.push(Verdict::ValidRequest);
    }
    atoms.extend(results.iter().map(|v| v.atom()));
    ValidityResult {
        verdict: results[0],
        atoms,
    }
}

/// Runs the validator matching `gamma`. A resource request is checked per
/// changed resource; the first invalid entry decides the verdict.
pub fn validate_request(inst: &Instance, req: &RescheduleRequest, gamma: RequestType) -> ValidityResult {
    match gamma {
        RequestType::StartTime => validate_time_request(inst, req.task, req.desired_start),
        RequestType::Resource => {
            let mut verdict = Verdict::ValidRequest;
            let mut requests = Vec::new();
            let mut derived = Vec::new();
            for (rid, amount) in req.changed_resources(inst) {
                let one = validate_resource_request(inst, req.task, rid, amount);
                if verdict == Verdict::ValidRequest {
                    verdict = one.verdict;
                }
                for atom in one.atoms {
                    if atom.starts_with("request(") {
                        requests.push(atom);
                    } else if !atom.starts_with("result(") && !derived.contains(&atom) {
                        derived.push(atom);
                    }
                }
            }
            requests.extend(derived);
            requests.push(verdict.atom());
            ValidityResult {
                verdict,
                atoms: requests,
            }
        }
    }
}
