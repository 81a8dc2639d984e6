//! Request categorization, validity rules, the three-valued decision tree
//! and the clarification dialogue.

mod dialogue;
mod tree;
mod validity;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Instance, ResourceId, Schedule, TaskId, Time};

pub use dialogue::{
    interpret_intention, parse_answer, question_text, Answer, Clock, Dialogue, DialogueError, DialogueStatus,
    IntentConfig, InteractionEvent, InteractionHistory, Interpretation, InterpretationStatus, ManualClock, Responder,
    ScriptedResponder, SystemClock, ANSWER_PROMPT,
};
pub use tree::{DecisionTree, EvalOutcome, IntentLabel, SymbolStatus, TreeError};
pub use validity::{validate_request, validate_resource_request, validate_time_request, ValidityResult, Verdict};

/// Three-valued truth: true, false, or unknown (℧).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriState {
    True,
    False,
    #[default]
    Unknown,
}

impl TriState {
    pub fn is_known(self) -> bool {
        self != TriState::Unknown
    }

    pub fn to_bool(self) -> Option<bool> {
        match self {
            TriState::True => Some(true),
            TriState::False => Some(false),
            TriState::Unknown => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            TriState::True => "⊤",
            TriState::False => "⊥",
            TriState::Unknown => "℧",
        }
    }
}

impl From<bool> for TriState {
    fn from(b: bool) -> Self {
        if b {
            TriState::True
        } else {
            TriState::False
        }
    }
}

impl From<Option<bool>> for TriState {
    fn from(b: Option<bool>) -> Self {
        b.map_or(TriState::Unknown, TriState::from)
    }
}

impl fmt::Display for TriState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TriState::True => "true",
            TriState::False => "false",
            TriState::Unknown => "unknown",
        })
    }
}

/// Whether a request is start-time-focused (`s`) or resource-focused (`r`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RequestType {
    #[serde(rename = "s")]
    StartTime,
    #[serde(rename = "r")]
    Resource,
}

impl fmt::Display for RequestType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequestType::StartTime => "s",
            RequestType::Resource => "r",
        })
    }
}

/// A possibly ambiguous single-task reschedule request.
///
/// `delta`/`rho` are the scope and precedence flags for a time change,
/// `eta`/`theta` the same pair for a resource change. Resources not listed
/// in `desired_resources` keep their current demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RescheduleRequest {
    pub task: TaskId,
    pub desired_start: Time,
    #[serde(default)]
    pub desired_resources: BTreeMap<ResourceId, u32>,
    #[serde(default)]
    pub delta: TriState,
    #[serde(default)]
    pub rho: TriState,
    #[serde(default)]
    pub eta: TriState,
    #[serde(default)]
    pub theta: TriState,
}

impl RescheduleRequest {
    pub fn new(task: TaskId, desired_start: Time) -> Self {
        Self {
            task,
            desired_start,
            desired_resources: BTreeMap::new(),
            delta: TriState::Unknown,
            rho: TriState::Unknown,
            eta: TriState::Unknown,
            theta: TriState::Unknown,
        }
    }

    pub fn with_resource(mut self, resource: ResourceId, amount: u32) -> Self {
        self.desired_resources.insert(resource, amount);
        self
    }

    /// The `(scope, precedence)` flags that apply to `gamma`.
    pub fn flags(&self, gamma: RequestType) -> (TriState, TriState) {
        match gamma {
            RequestType::StartTime => (self.delta, self.rho),
            RequestType::Resource => (self.eta, self.theta),
        }
    }

    /// Resource entries that differ from the task's current demand. Entries
    /// for unknown resources or tasks count as changes.
    pub fn changed_resources(&self, inst: &Instance) -> Vec<(ResourceId, u32)> {
        self.desired_resources
            .iter()
            .filter(|&(&rid, &amount)| {
                if !inst.is_real_task(self.task) {
                    return true;
                }
                match inst.resource_index(rid) {
                    Some(r) => inst.requirement(self.task, r) != amount,
                    None => true,
                }
            })
            .map(|(&r, &a)| (r, a))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RequestError {
    #[error("request for task {0} changes neither its start time nor its resources")]
    Degenerate(TaskId),
}

/// Categorizes a request: resource-focused when it changes any demand of
/// the target task (even if the start also changes), start-time-focused
/// when only the start differs from the baseline.
pub fn categorize_request(
    baseline: &Schedule,
    inst: &Instance,
    req: &RescheduleRequest,
) -> Result<RequestType, RequestError> {
    if !req.changed_resources(inst).is_empty() {
        return Ok(RequestType::Resource);
    }
    let same_start = req.task < baseline.task_count()
        && inst.is_real_task(req.task)
        && baseline.start(req.task) == req.desired_start;
    if same_start {
        Err(RequestError::Degenerate(req.task))
    } else {
        Ok(RequestType::StartTime)
    }
}

/// Clarified intent `(b_s1, b_s2, b_r1, b_r2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentVector {
    pub b_s1: TriState,
    pub b_s2: TriState,
    pub b_r1: TriState,
    pub b_r2: TriState,
}

impl IntentVector {
    pub fn unknown() -> Self {
        Self::default()
    }

    /// `(scope, precedence)` for the given request type.
    pub fn pair(&self, gamma: RequestType) -> (TriState, TriState) {
        match gamma {
            RequestType::StartTime => (self.b_s1, self.b_s2),
            RequestType::Resource => (self.b_r1, self.b_r2),
        }
    }

    pub fn set_pair(&mut self, gamma: RequestType, scope: TriState, precedence: TriState) {
        match gamma {
            RequestType::StartTime => {
                self.b_s1 = scope;
                self.b_s2 = precedence;
            }
            RequestType::Resource => {
                self.b_r1 = scope;
                self.b_r2 = precedence;
            }
        }
    }
}

impl fmt::Display for IntentVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.b_s1.symbol(),
            self.b_s2.symbol(),
            self.b_r1.symbol(),
            self.b_r2.symbol()
        )
    }
}
