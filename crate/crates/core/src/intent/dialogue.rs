//! Clarification dialogue.
//!
//! [`Dialogue`] is a resumable state machine: it is opened on a request,
//! fed answers (or silences) one at a time and can be serialized between
//! steps. [`interpret_intention`] drives it to completion with a
//! [`Responder`].

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{Instance, Schedule};

use super::tree::{DecisionTree, EvalOutcome, IntentLabel};
use super::validity::{validate_request, ValidityResult};
use super::{categorize_request, IntentVector, RequestType, RescheduleRequest, TriState};

/// Printed before each answer.
pub const ANSWER_PROMPT: &str = "?[1, 0]:";

const SCOPE_QUESTION: &str =
    "Do you want the new schedule to optimize by affecting other tasks' start times? Yes for 1; no for 0.";
const PRECEDENCE_QUESTION: &str =
    "Do you want the task to depend on others while maintaining precedence? Yes for 1; no for 0.";

/// Question asked for `symbol`. Both request types share the wording.
pub fn question_text(symbol: usize, _gamma: RequestType) -> String {
    match symbol {
        1 => SCOPE_QUESTION.to_string(),
        2 => PRECEDENCE_QUESTION.to_string(),
        s => format!("Is intention symbol {s} true? Yes for 1; no for 0."),
    }
}

/// `"1"` is true and `"0"` false; anything else is invalid.
pub fn parse_answer(text: &str) -> Option<bool> {
    match text.trim() {
        "1" => Some(true),
        "0" => Some(false),
        _ => None,
    }
}

pub trait Clock: Send + Sync {
    /// Time elapsed since an arbitrary fixed origin.
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock {
    millis: AtomicU64,
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, by: Duration) {
        self.millis.fetch_add(by.as_millis() as u64, Ordering::SeqCst);
    }

    pub fn set(&self, to: Duration) {
        self.millis.store(to.as_millis() as u64, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        Duration::from_millis(self.millis.load(Ordering::SeqCst))
    }
}

#[derive(Clone)]
pub struct IntentConfig {
    /// Budget for the whole dialogue.
    pub time_limit: Duration,
    /// How long a single question waits for an answer.
    pub answer_wait: Duration,
    pub clock: Arc<dyn Clock>,
}

impl Default for IntentConfig {
    fn default() -> Self {
        Self {
            time_limit: Duration::from_secs(300),
            answer_wait: Duration::from_secs(60),
            clock: Arc::new(SystemClock::default()),
        }
    }
}

impl std::fmt::Debug for IntentConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IntentConfig")
            .field("time_limit", &self.time_limit)
            .field("answer_wait", &self.answer_wait)
            .finish_non_exhaustive()
    }
}

/// Source of answers. `None` means nothing arrived within `wait`.
pub trait Responder {
    fn respond(&mut self, symbol: usize, question: &str, wait: Duration) -> Option<String>;
}

/// Replays a fixed list of answers; `None` entries are silences. Once the
/// list runs out every question goes unanswered. With a manual clock
/// attached, each answer advances it by `step` and each silence by the
/// full wait.
pub struct ScriptedResponder {
    answers: VecDeque<Option<String>>,
    clock: Option<Arc<ManualClock>>,
    step: Duration,
}

impl ScriptedResponder {
    pub fn new<I, S>(answers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            answers: answers.into_iter().map(|a| Some(a.into())).collect(),
            clock: None,
            step: Duration::ZERO,
        }
    }

    pub fn with_silences(answers: impl IntoIterator<Item = Option<String>>) -> Self {
        Self {
            answers: answers.into_iter().collect(),
            clock: None,
            step: Duration::ZERO,
        }
    }

    pub fn with_clock(mut self, clock: Arc<ManualClock>, step: Duration) -> Self {
        self.clock = Some(clock);
        self.step = step;
        self
    }
}

impl Responder for ScriptedResponder {
    fn respond(&mut self, _symbol: usize, _question: &str, wait: Duration) -> Option<String> {
        let next = self.answers.pop_front().flatten();
        if let Some(clock) = &self.clock {
            clock.advance(if next.is_some() { self.step.min(wait) } else { wait });
        }
        next
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "kebab-case")]
pub enum Answer {
    Pending,
    Given(String),
    NoResponse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    /// Interaction block the question belongs to. Block 0 is the initial
    /// evaluation, so questions start in block 1.
    pub interaction: usize,
    pub symbol: usize,
    pub question: String,
    pub answer: Answer,
    /// Parsed value of a valid answer.
    pub value: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InteractionHistory(pub Vec<InteractionEvent>);

impl InteractionHistory {
    pub fn events(&self) -> &[InteractionEvent] {
        &self.0
    }

    /// `(question, answer)` pairs that received an answer.
    pub fn answered(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().filter_map(|e| match &e.answer {
            Answer::Given(a) => Some((e.question.as_str(), a.as_str())),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum DialogueStatus {
    AwaitingAnswer {
        symbol: usize,
    },
    Resolved {
        label: IntentLabel,
    },
    /// The request was degenerate or failed validation.
    Rejected,
    TimedOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpretationStatus {
    Resolved,
    Invalid,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DialogueError {
    #[error("dialogue is not waiting for an answer")]
    NotAwaiting,
}

/// Final outcome of a dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interpretation {
    pub status: InterpretationStatus,
    /// `None` for a request that changes nothing.
    pub request_type: Option<RequestType>,
    pub intent: IntentVector,
    pub validity: Option<ValidityResult>,
    pub label: Option<IntentLabel>,
    /// Explanation facts gathered during interpretation.
    pub facts: Vec<String>,
    pub history: InteractionHistory,
    pub transcript: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    request: RescheduleRequest,
    request_type: Option<RequestType>,
    validity: Option<ValidityResult>,
    tree: DecisionTree,
    history: InteractionHistory,
    /// Derived-fact lines printed at the end of each interaction block.
    snapshots: Vec<Vec<String>>,
    status: DialogueStatus,
    intent: IntentVector,
    facts: Vec<String>,
    started_ms: u64,
    last_activity_ms: u64,
}

fn millis(d: Duration) -> u64 {
    d.as_millis() as u64
}

impl Dialogue {
    /// Categorizes and validates the request, seeds the tree with the
    /// request's own flags and evaluates once. The dialogue is then either
    /// finished or waiting for its first answer.
    pub fn open(baseline: &Schedule, inst: &Instance, req: &RescheduleRequest, now: Duration) -> Self {
        let mut d = Dialogue {
            request: req.clone(),
            request_type: None,
            validity: None,
            tree: DecisionTree::new(2, None).expect("two symbols"),
            history: InteractionHistory::default(),
            snapshots: Vec::new(),
            status: DialogueStatus::Rejected,
            intent: IntentVector::unknown(),
            facts: Vec::new(),
            started_ms: millis(now),
            last_activity_ms: millis(now),
        };
        let Ok(gamma) = categorize_request(baseline, inst, req) else {
            d.facts.push("result(degenerate_request)".into());
            return d;
        };
        d.request_type = Some(gamma);
        let validity = validate_request(inst, req, gamma);
        d.facts.extend(validity.atoms.iter().cloned());
        let valid = validity.is_valid();
        d.validity = Some(validity);
        if !valid {
            return d;
        }
        let (f1, f2) = req.flags(gamma);
        for (symbol, flag) in [(1, f1), (2, f2)] {
            if let Some(v) = flag.to_bool() {
                d.tree.assign(symbol, v).expect("symbol in range");
            }
        }
        d.step();
        d
    }

    pub fn status(&self) -> &DialogueStatus {
        &self.status
    }

    pub fn request(&self) -> &RescheduleRequest {
        &self.request
    }

    pub fn request_type(&self) -> Option<RequestType> {
        self.request_type
    }

    pub fn history(&self) -> &InteractionHistory {
        &self.history
    }

    pub fn is_finished(&self) -> bool {
        !matches!(self.status, DialogueStatus::AwaitingAnswer { .. })
    }

    /// The open question, if any.
    pub fn pending(&self) -> Option<(usize, String)> {
        match self.status {
            DialogueStatus::AwaitingAnswer { symbol } => {
                Some((symbol, question_text(symbol, self.request_type.expect("typed request"))))
            }
            _ => None,
        }
    }

    /// Evaluates the tree, records the snapshot and either resolves or
    /// opens the next question.
    fn step(&mut self) {
        let outcome = self.tree.eval();
        let mut lines = Vec::new();
        let asserted = self.tree.assertions();
        if !asserted.is_empty() {
            let items: Vec<String> = asserted.iter().map(|(s, v)| format!("sym({s},\"{v}\")")).collect();
            lines.push(format!("sym: [{}]", items.join(", ")));
        }
        match outcome {
            EvalOutcome::Intent { label, values } => {
                lines.push(format!("intent: [intent({label})]"));
                self.snapshots.push(lines);
                let gamma = self.request_type.expect("typed request");
                self.intent
                    .set_pair(gamma, TriState::from(values[0]), TriState::from(values[1]));
                self.facts.push(format!("intent({label})"));
                self.status = DialogueStatus::Resolved { label };
            }
            EvalOutcome::Query {
                symbol,
                unknown,
                contradictions,
            } => {
                if !contradictions.is_empty() {
                    let items: Vec<String> = contradictions.iter().map(|s| format!("contradiction({s})")).collect();
                    lines.push(format!("contradiction: [{}]", items.join(", ")));
                }
                let items: Vec<String> = unknown.iter().map(|s| format!("unknown({s})")).collect();
                lines.push(format!("unknown: [{}]", items.join(", ")));
                lines.push(format!("query: [query({symbol})]"));
                self.snapshots.push(lines);
                for s in contradictions {
                    self.tree.release(s).expect("symbol in range");
                }
                self.ask(symbol);
            }
        }
    }

    fn ask(&mut self, symbol: usize) {
        let gamma = self.request_type.expect("typed request");
        self.history.0.push(InteractionEvent {
            interaction: self.snapshots.len(),
            symbol,
            question: question_text(symbol, gamma),
            answer: Answer::Pending,
            value: None,
        });
        self.status = DialogueStatus::AwaitingAnswer { symbol };
    }

    /// The budget is checked after an answer has been taken in, so an
    /// answer landing past the deadline still ends in a timeout.
    fn check_time(&mut self, now: Duration, cfg: &IntentConfig) {
        if Duration::from_millis(millis(now).saturating_sub(self.started_ms)) < cfg.time_limit {
            return;
        }
        if matches!(self.status, DialogueStatus::Resolved { .. }) {
            self.intent = IntentVector::unknown();
            self.facts.retain(|f| !f.starts_with("intent("));
            if let Some(last) = self.snapshots.last_mut() {
                last.retain(|l| !l.starts_with("intent:"));
            }
        }
        self.time_out();
    }

    fn time_out(&mut self) {
        if let Some(e) = self.history.0.last_mut() {
            if e.answer == Answer::Pending {
                e.answer = Answer::NoResponse;
            }
        }
        self.facts.push("timeout".into());
        self.status = DialogueStatus::TimedOut;
    }

    /// Records an answer to the open question. Invalid answers re-ask the
    /// same question; the time budget is checked after every answer.
    pub fn submit(&mut self, text: &str, now: Duration, cfg: &IntentConfig) -> Result<&DialogueStatus, DialogueError> {
        let DialogueStatus::AwaitingAnswer { symbol } = self.status else {
            return Err(DialogueError::NotAwaiting);
        };
        self.last_activity_ms = millis(now);
        let value = parse_answer(text);
        let event = self.history.0.last_mut().expect("pending question");
        event.answer = Answer::Given(text.to_string());
        event.value = value;
        match value {
            Some(v) => {
                self.tree.assign(symbol, v).expect("symbol in range");
                self.step();
            }
            None => self.ask(symbol),
        }
        self.check_time(now, cfg);
        Ok(&self.status)
    }

    /// Records that the open question went unanswered for a full wait and
    /// asks it again unless the budget is spent.
    pub fn no_response(&mut self, now: Duration, cfg: &IntentConfig) -> Result<&DialogueStatus, DialogueError> {
        let DialogueStatus::AwaitingAnswer { symbol } = self.status else {
            return Err(DialogueError::NotAwaiting);
        };
        let now = now.max(Duration::from_millis(self.last_activity_ms) + cfg.answer_wait);
        self.last_activity_ms = millis(now);
        self.history.0.last_mut().expect("pending question").answer = Answer::NoResponse;
        self.check_time(now, cfg);
        if !self.is_finished() {
            self.ask(symbol);
        }
        Ok(&self.status)
    }

    /// Times the dialogue out when the open question has waited longer
    /// than the per-answer wait or the whole budget is spent. Returns
    /// whether it expired.
    pub fn expire(&mut self, now: Duration, cfg: &IntentConfig) -> bool {
        if self.is_finished() {
            return false;
        }
        let idle = Duration::from_millis(millis(now).saturating_sub(self.last_activity_ms));
        let total = Duration::from_millis(millis(now).saturating_sub(self.started_ms));
        if idle >= cfg.answer_wait || total >= cfg.time_limit {
            self.time_out();
            return true;
        }
        false
    }

    pub fn interpretation(&self) -> Interpretation {
        let status = match self.status {
            DialogueStatus::Resolved { .. } => InterpretationStatus::Resolved,
            DialogueStatus::TimedOut | DialogueStatus::AwaitingAnswer { .. } => InterpretationStatus::TimedOut,
            DialogueStatus::Rejected => InterpretationStatus::Invalid,
        };
        let label = match &self.status {
            DialogueStatus::Resolved { label } => Some(label.clone()),
            _ => None,
        };
        Interpretation {
            status,
            request_type: self.request_type,
            intent: self.intent,
            validity: self.validity.clone(),
            label,
            facts: self.facts.clone(),
            history: self.history.clone(),
            transcript: self.transcript(),
        }
    }

    /// Human-readable record of the dialogue.
    pub fn transcript(&self) -> String {
        let mut out = Vec::new();
        let summary = match &self.validity {
            Some(v) => v.summary(),
            None => "result(degenerate_request)".to_string(),
        };
        out.push(format!("Result:{summary}"));
        let blocks = self
            .snapshots
            .len()
            .max(self.history.0.last().map_or(0, |e| e.interaction + 1));
        for k in 0..blocks {
            out.push(String::new());
            out.push(format!("===== interaction #{k:02} ====="));
            let events: Vec<&InteractionEvent> = self.history.0.iter().filter(|e| e.interaction == k).collect();
            for (i, e) in events.iter().enumerate() {
                out.push(e.question.clone());
                match &e.answer {
                    Answer::Pending => out.push(ANSWER_PROMPT.to_string()),
                    Answer::Given(a) => {
                        out.push(format!("{ANSWER_PROMPT}{a}"));
                        if e.value.is_none() {
                            out.push(format!("Invalid answer: {a}"));
                        }
                    }
                    Answer::NoResponse => {
                        out.push(ANSWER_PROMPT.to_string());
                        out.push("No answer".to_string());
                    }
                }
                if e.value.is_none() && i + 1 < events.len() {
                    out.push(String::new());
                }
            }
            if let Some(lines) = self.snapshots.get(k) {
                out.extend(lines.iter().cloned());
            }
        }
        if self.status == DialogueStatus::TimedOut {
            out.push("timeout: [timeout]".to_string());
        }
        let mut text = out.join("\n");
        text.push('\n');
        text
    }
}

/// Runs the clarification dialogue to completion. Never fails: a
/// degenerate or invalid request yields an `Invalid` interpretation, and a
/// responder that stops answering runs the dialogue into its time budget.
pub fn interpret_intention(
    baseline: &Schedule,
    inst: &Instance,
    req: &RescheduleRequest,
    responder: &mut dyn Responder,
    cfg: &IntentConfig,
) -> Interpretation {
    let mut d = Dialogue::open(baseline, inst, req, cfg.clock.now());
    while let Some((symbol, question)) = d.pending() {
        let reply = responder.respond(symbol, &question, cfg.answer_wait);
        let now = cfg.clock.now();
        let _ = match reply {
            Some(text) => d.submit(&text, now, cfg),
            None => d.no_response(now, cfg),
        };
    }
    d.interpretation()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;
    use crate::solver::{solve, FixedAssignments, SolveConfig};

    fn setup() -> (Instance, Schedule) {
        let inst = fixture::instance();
        let s = solve(&inst, &FixedAssignments::new(), &SolveConfig::default())
            .unwrap()
            .schedule
            .unwrap();
        (inst, s)
    }

    fn manual() -> (Arc<ManualClock>, IntentConfig) {
        let clock = Arc::new(ManualClock::new());
        let cfg = IntentConfig {
            clock: clock.clone(),
            ..IntentConfig::default()
        };
        (clock, cfg)
    }

    #[test]
    fn answers_parse_strictly() {
        assert_eq!(parse_answer("1"), Some(true));
        assert_eq!(parse_answer("0"), Some(false));
        for bad in ["Yes", "2", "", "no", "10"] {
            assert_eq!(parse_answer(bad), None, "{bad}");
        }
    }

    #[test]
    fn fully_specified_request_asks_nothing() {
        let (inst, base) = setup();
        let (_, cfg) = manual();
        let mut req = RescheduleRequest::new(4, 4).with_resource(1, 1);
        req.eta = TriState::True;
        req.theta = TriState::False;
        let mut r = ScriptedResponder::new(Vec::<String>::new());
        let out = interpret_intention(&base, &inst, &req, &mut r, &cfg);
        assert_eq!(out.status, InterpretationStatus::Resolved);
        assert!(out.history.events().is_empty());
        assert_eq!(
            out.intent.pair(RequestType::Resource),
            (TriState::True, TriState::False)
        );
        assert_eq!(out.label.unwrap().as_str(), "op_01");
    }

    #[test]
    fn one_missing_flag_asks_once() {
        let (inst, base) = setup();
        let (_, cfg) = manual();
        let mut req = RescheduleRequest::new(4, 4);
        req.delta = TriState::False;
        let mut r = ScriptedResponder::new(["1"]);
        let out = interpret_intention(&base, &inst, &req, &mut r, &cfg);
        assert_eq!(out.history.events().len(), 1);
        assert_eq!(out.history.events()[0].symbol, 2);
        assert_eq!(
            out.intent.pair(RequestType::StartTime),
            (TriState::False, TriState::True)
        );
        assert_eq!(
            out.intent.pair(RequestType::Resource),
            (TriState::Unknown, TriState::Unknown)
        );
    }

    #[test]
    fn invalid_request_skips_dialogue() {
        let (inst, base) = setup();
        let (_, cfg) = manual();
        let mut r = ScriptedResponder::new(["1", "1"]);
        let out = interpret_intention(&base, &inst, &RescheduleRequest::new(99, 4), &mut r, &cfg);
        assert_eq!(out.status, InterpretationStatus::Invalid);
        assert!(out.facts.contains(&"result(invalid_task)".to_string()));
        assert!(out.history.events().is_empty());
        assert_eq!(out.transcript, "Result:request(99,4) result(invalid_task)\n");
    }

    #[test]
    fn degenerate_request_is_invalid() {
        let (inst, base) = setup();
        let (_, cfg) = manual();
        let mut r = ScriptedResponder::new(Vec::<String>::new());
        let out = interpret_intention(&base, &inst, &RescheduleRequest::new(4, 5), &mut r, &cfg);
        assert_eq!(out.status, InterpretationStatus::Invalid);
        assert_eq!(out.request_type, None);
    }

    #[test]
    fn silence_runs_into_the_budget() {
        let (inst, base) = setup();
        let (clock, cfg) = manual();
        let mut r = ScriptedResponder::new(Vec::<String>::new()).with_clock(clock, Duration::from_secs(1));
        let out = interpret_intention(&base, &inst, &RescheduleRequest::new(4, 4), &mut r, &cfg);
        assert_eq!(out.status, InterpretationStatus::TimedOut);
        assert_eq!(out.facts.last().unwrap(), "timeout");
        assert_eq!(out.intent, IntentVector::unknown());
        assert_eq!(out.history.events().len(), 5);
        assert!(out.transcript.ends_with("timeout: [timeout]\n"));
    }

    #[test]
    fn late_answer_times_out() {
        let (inst, base) = setup();
        let (clock, cfg) = manual();
        let mut d = Dialogue::open(&base, &inst, &RescheduleRequest::new(4, 4), clock.now());
        d.submit("1", Duration::from_secs(10), &cfg).unwrap();
        let status = d.submit("1", Duration::from_secs(301), &cfg).unwrap();
        assert_eq!(status, &DialogueStatus::TimedOut);
        assert_eq!(d.interpretation().intent, IntentVector::unknown());
        assert_eq!(
            d.submit("1", Duration::from_secs(302), &cfg),
            Err(DialogueError::NotAwaiting)
        );
    }

    #[test]
    fn expiry_is_lazy_and_uses_the_answer_wait() {
        let (inst, base) = setup();
        let (_, cfg) = manual();
        let mut d = Dialogue::open(&base, &inst, &RescheduleRequest::new(4, 4), Duration::ZERO);
        assert!(!d.expire(Duration::from_secs(59), &cfg));
        assert!(d.expire(Duration::from_secs(60), &cfg));
        assert_eq!(d.status(), &DialogueStatus::TimedOut);
    }

    #[test]
    fn dialogue_survives_serialization() {
        let (inst, base) = setup();
        let (_, cfg) = manual();
        let mut d = Dialogue::open(&base, &inst, &RescheduleRequest::new(4, 4), Duration::ZERO);
        d.submit("1", Duration::from_secs(1), &cfg).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let mut back: Dialogue = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        back.submit("0", Duration::from_secs(2), &cfg).unwrap();
        assert_eq!(back.interpretation().label.unwrap().as_str(), "op_01");
    }
}
