//! Session-oriented operations over the store. The HTTP layer and the CLI
//! are thin wrappers around [`Service`].

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use resched_core::intent::{Clock, Dialogue, InteractionHistory, RescheduleRequest, TriState};
use resched_core::model::{
    parse_instance, serialize_instance, FixedAssignments, Format, Instance, ParseError, ResourceId, Schedule, TaskId,
    Time,
};
use resched_core::pipeline::{complete, DispatchConfig, RescheduleResult, RescheduleStatus};
use resched_core::solver::{solve, SolveStatus};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::store::{new_id, Kind, Store, StoreError};

/// Wall-clock time since the Unix epoch.
#[derive(Debug, Default, Clone, Copy)]
pub struct UnixClock;

impl Clock for UnixClock {
    fn now(&self) -> Duration {
        SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{message}")]
    BadRequest { message: String, detail: Option<Value> },
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("storage failure: {0}")]
    Storage(#[from] StoreError),
}

impl ApiError {
    pub fn kind(&self) -> &'static str {
        match self {
            ApiError::BadRequest { .. } => "bad-request",
            ApiError::NotFound(_) => "not-found",
            ApiError::Conflict(_) => "conflict",
            ApiError::Unprocessable(_) => "unprocessable",
            ApiError::Storage(_) => "storage",
        }
    }

    pub fn status_code(&self) -> u16 {
        match self {
            ApiError::BadRequest { .. } => 400,
            ApiError::NotFound(_) => 404,
            ApiError::Conflict(_) => 409,
            ApiError::Unprocessable(_) => 422,
            ApiError::Storage(_) => 500,
        }
    }

    pub fn body(&self) -> Value {
        let mut body = serde_json::json!({ "error": self.kind(), "message": self.to_string() });
        if let ApiError::BadRequest { detail: Some(d), .. } = self {
            body["detail"] = d.clone();
        }
        body
    }

    fn bad(message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            message: message.into(),
            detail: None,
        }
    }
}

fn parse_error(e: ParseError) -> ApiError {
    match e {
        ParseError::Syntax { .. } => ApiError::bad(e.to_string()),
        ParseError::Semantic(report) => ApiError::BadRequest {
            message: "instance violates model invariants".into(),
            detail: serde_json::to_value(&report).ok(),
        },
    }
}

/// A reschedule request as submitted by clients. The start defaults to the
/// task's baseline start, which suits pure resource changes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestDoc {
    pub task: TaskId,
    #[serde(default)]
    pub desired_start: Option<Time>,
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

impl RequestDoc {
    pub fn resolve(&self, baseline: &Schedule) -> RescheduleRequest {
        let fallback = if self.task < baseline.task_count() {
            baseline.start(self.task)
        } else {
            0
        };
        RescheduleRequest {
            task: self.task,
            desired_start: self.desired_start.unwrap_or(fallback),
            desired_resources: self.desired_resources.clone(),
            delta: self.delta,
            rho: self.rho,
            eta: self.eta,
            theta: self.theta,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    /// Native-format document.
    pub instance: Value,
    pub baseline: Option<Schedule>,
    pub created_ms: u64,
}

impl InstanceRecord {
    fn instance(&self) -> Result<Instance, ApiError> {
        parse_instance(&self.instance.to_string(), Format::Native).map_err(|e| {
            ApiError::Storage(StoreError::Corrupt {
                path: self.id.clone().into(),
                message: e.to_string(),
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    AwaitingRequest,
    AwaitingAnswer,
    Done,
    Failed,
}

impl SessionState {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Done | SessionState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingQuestion {
    pub symbol: usize,
    pub text: String,
}

/// Stored session document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub instance_id: String,
    pub baseline: Schedule,
    pub request: RescheduleRequest,
    pub state: SessionState,
    pub pending: Option<PendingQuestion>,
    pub history: InteractionHistory,
    pub dialogue: Option<Dialogue>,
    pub result: Option<RescheduleResult>,
    pub created_ms: u64,
    pub updated_ms: u64,
}

/// What clients see of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub instance_id: String,
    pub state: SessionState,
    pub pending: Option<PendingQuestion>,
    pub request: RescheduleRequest,
    pub baseline: Schedule,
    pub history: InteractionHistory,
    pub result: Option<RescheduleResult>,
    pub created_ms: u64,
    pub updated_ms: u64,
}

impl From<&SessionRecord> for SessionView {
    fn from(s: &SessionRecord) -> Self {
        Self {
            id: s.id.clone(),
            instance_id: s.instance_id.clone(),
            state: s.state,
            pending: s.pending.clone(),
            request: s.request.clone(),
            baseline: s.baseline.clone(),
            history: s.history.clone(),
            result: s.result.clone(),
            created_ms: s.created_ms,
            updated_ms: s.updated_ms,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceView {
    pub id: String,
    pub instance: Value,
    pub baseline: Option<Schedule>,
}

impl From<&InstanceRecord> for InstanceView {
    fn from(r: &InstanceRecord) -> Self {
        Self {
            id: r.id.clone(),
            instance: r.instance.clone(),
            baseline: r.baseline.clone(),
        }
    }
}

pub struct Service {
    store: Store,
    cfg: DispatchConfig,
    leases: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Service {
    /// `cfg.intent.clock` should count from the Unix epoch (see
    /// [`UnixClock`]) so persisted timestamps stay meaningful across
    /// restarts; `cfg.intent.answer_wait` is the session expiry.
    pub fn new(store: Store, cfg: DispatchConfig) -> Self {
        Self {
            store,
            cfg,
            leases: Mutex::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn now(&self) -> Duration {
        self.cfg.intent.clock.now()
    }

    fn lease(&self, key: String) -> Arc<Mutex<()>> {
        let mut map = self.leases.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(key).or_default().clone()
    }

    fn load_instance(&self, id: &str) -> Result<InstanceRecord, ApiError> {
        self.store.get(Kind::Instance, id).map_err(|e| match e {
            StoreError::NotFound => ApiError::NotFound(format!("instance {id}")),
            e => e.into(),
        })
    }

    fn load_session(&self, id: &str) -> Result<SessionRecord, ApiError> {
        self.store.get(Kind::Session, id).map_err(|e| match e {
            StoreError::NotFound => ApiError::NotFound(format!("session {id}")),
            e => e.into(),
        })
    }

    pub fn create_instance(&self, text: &str, format: Format) -> Result<InstanceView, ApiError> {
        let inst = parse_instance(text, format).map_err(parse_error)?;
        let instance: Value = serde_json::from_str(&serialize_instance(&inst)).expect("canonical document is JSON");
        loop {
            let record = InstanceRecord {
                id: new_id(),
                instance: instance.clone(),
                baseline: None,
                created_ms: self.now().as_millis() as u64,
            };
            match self.store.create(Kind::Instance, &record.id, &record) {
                Ok(()) => return Ok(InstanceView::from(&record)),
                Err(StoreError::Exists) => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn get_instance(&self, id: &str) -> Result<InstanceView, ApiError> {
        Ok(InstanceView::from(&self.load_instance(id)?))
    }

    /// Solves and caches the baseline; later calls return the cached one.
    pub fn solve_baseline(&self, id: &str) -> Result<Schedule, ApiError> {
        let lease = self.lease(format!("instance/{id}"));
        let _guard = lease.lock().unwrap_or_else(|e| e.into_inner());
        let mut record = self.load_instance(id)?;
        if let Some(b) = &record.baseline {
            return Ok(b.clone());
        }
        let inst = record.instance()?;
        let r = solve(&inst, &FixedAssignments::new(), &self.cfg.solve)
            .map_err(|e| ApiError::Unprocessable(e.to_string()))?;
        let schedule = match (r.status, r.schedule) {
            (SolveStatus::Optimal, Some(s)) => s,
            (SolveStatus::Timeout, _) => return Err(ApiError::Unprocessable("baseline solve timed out".into())),
            _ => {
                return Err(ApiError::Unprocessable(
                    "instance has no feasible schedule within its horizon".into(),
                ))
            }
        };
        record.baseline = Some(schedule.clone());
        self.store.put(Kind::Instance, id, &record)?;
        Ok(schedule)
    }

    /// Creates a session for the request and runs the dialogue until it
    /// needs an answer or finishes.
    pub fn open_session(&self, instance_id: &str, doc: &RequestDoc) -> Result<SessionView, ApiError> {
        let record = self.load_instance(instance_id)?;
        let inst = record.instance()?;
        let baseline = self.solve_baseline(instance_id)?;
        let now = self.now().as_millis() as u64;
        let mut session = loop {
            let session = SessionRecord {
                id: new_id(),
                instance_id: instance_id.to_string(),
                request: doc.resolve(&baseline),
                baseline: baseline.clone(),
                state: SessionState::AwaitingRequest,
                pending: None,
                history: InteractionHistory::default(),
                dialogue: None,
                result: None,
                created_ms: now,
                updated_ms: now,
            };
            match self.store.create(Kind::Session, &session.id, &session) {
                Ok(()) => break session,
                Err(StoreError::Exists) => continue,
                Err(e) => return Err(e.into()),
            }
        };
        let lease = self.lease(format!("session/{}", session.id));
        let _guard = lease.lock().unwrap_or_else(|e| e.into_inner());
        self.refresh(&mut session, &inst)?;
        Ok(SessionView::from(&session))
    }

    /// Syncs the record with its dialogue, finishing the pipeline when
    /// the dialogue is over.
    fn settle(&self, s: &mut SessionRecord, inst: &Instance) {
        let d = s.dialogue.as_ref().expect("dialogue opened");
        s.history = d.history().clone();
        s.updated_ms = self.now().as_millis() as u64;
        match d.pending() {
            Some((symbol, text)) => {
                s.state = SessionState::AwaitingAnswer;
                s.pending = Some(PendingQuestion { symbol, text });
            }
            None => {
                let result = complete(inst, &s.baseline, &s.request, &d.interpretation(), &self.cfg);
                s.state = if result.status == RescheduleStatus::Ok {
                    SessionState::Done
                } else {
                    SessionState::Failed
                };
                s.pending = None;
                s.result = Some(result);
            }
        }
    }

    /// Advances a session that has not started its dialogue and expires
    /// one whose question waited too long. Persists any change.
    fn refresh(&self, s: &mut SessionRecord, inst: &Instance) -> Result<(), ApiError> {
        let now = self.now();
        let changed = match s.state {
            SessionState::AwaitingRequest => {
                s.dialogue = Some(Dialogue::open(&s.baseline, inst, &s.request, now));
                true
            }
            SessionState::AwaitingAnswer => s
                .dialogue
                .as_mut()
                .expect("dialogue opened")
                .expire(now, &self.cfg.intent),
            SessionState::Done | SessionState::Failed => false,
        };
        if changed {
            self.settle(s, inst);
            self.store.put(Kind::Session, &s.id, s)?;
        }
        Ok(())
    }

    fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&Self, &mut SessionRecord, &Instance) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let lease = self.lease(format!("session/{id}"));
        let _guard = lease.lock().unwrap_or_else(|e| e.into_inner());
        let mut s = self.load_session(id)?;
        let inst = self.load_instance(&s.instance_id)?.instance()?;
        self.refresh(&mut s, &inst)?;
        f(self, &mut s, &inst)
    }

    pub fn answer(&self, id: &str, text: &str) -> Result<SessionView, ApiError> {
        self.with_session(id, |svc, s, inst| {
            if s.state != SessionState::AwaitingAnswer {
                return Err(ApiError::Conflict(format!("session {id} is not awaiting an answer")));
            }
            let d = s.dialogue.as_mut().expect("dialogue opened");
            d.submit(text, svc.now(), &svc.cfg.intent)
                .map_err(|e| ApiError::Conflict(e.to_string()))?;
            svc.settle(s, inst);
            svc.store.put(Kind::Session, &s.id, s)?;
            Ok(SessionView::from(&*s))
        })
    }

    pub fn get_session(&self, id: &str) -> Result<SessionView, ApiError> {
        self.with_session(id, |_, s, _| Ok(SessionView::from(&*s)))
    }

    pub fn get_result(&self, id: &str) -> Result<RescheduleResult, ApiError> {
        self.with_session(id, |_, s, _| {
            s.result
                .clone()
                .ok_or_else(|| ApiError::Conflict(format!("session {id} has not finished")))
        })
    }

    pub fn transcript(&self, id: &str) -> Result<String, ApiError> {
        self.with_session(id, |_, s, _| {
            Ok(s.dialogue.as_ref().expect("dialogue opened").transcript())
        })
    }

    pub fn session_ids(&self) -> Result<Vec<String>, ApiError> {
        Ok(self.store.list(Kind::Session)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use resched_core::fixture;
    use resched_core::intent::{IntentConfig, ManualClock};

    fn service(dir: &std::path::Path) -> (Service, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new());
        clock.set(Duration::from_secs(1_000_000));
        let cfg = DispatchConfig {
            intent: IntentConfig {
                clock: clock.clone(),
                ..IntentConfig::default()
            },
            ..DispatchConfig::default()
        };
        (Service::new(Store::open(dir).unwrap(), cfg), clock)
    }

    fn case_doc() -> RequestDoc {
        serde_json::from_str(r#"{"task": 4, "desired_start": 4, "desired_resources": {"1": 1}}"#).unwrap()
    }

    #[test]
    fn baseline_is_cached() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, _) = service(dir.path());
        let inst = svc.create_instance(fixture::native_document(), Format::Native).unwrap();
        let a = svc.solve_baseline(&inst.id).unwrap();
        assert_eq!(a.start(4), 5);
        assert_eq!(svc.get_instance(&inst.id).unwrap().baseline, Some(a.clone()));
        assert_eq!(svc.solve_baseline(&inst.id).unwrap(), a);
    }

    #[test]
    fn bad_documents_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, _) = service(dir.path());
        let cyclic = r#"{"resources": [], "tasks": [
            {"id": 1, "duration": 1, "successors": [2]},
            {"id": 2, "duration": 1, "successors": [1]}]}"#;
        let err = svc.create_instance(cyclic, Format::Native).unwrap_err();
        assert_eq!(err.status_code(), 400);
        assert!(err.body()["detail"].to_string().contains("cycle"), "{}", err.body());
        assert_eq!(svc.create_instance("{", Format::Native).unwrap_err().status_code(), 400);
        assert_eq!(svc.get_instance("nope").unwrap_err().status_code(), 404);
    }

    #[test]
    fn dummy_only_instance_has_zero_makespan() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, _) = service(dir.path());
        let inst = svc
            .create_instance(r#"{"resources": [], "tasks": []}"#, Format::Native)
            .unwrap();
        assert_eq!(svc.solve_baseline(&inst.id).unwrap().makespan(), 0);
    }

    #[test]
    fn answering_walks_the_dialogue() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, _) = service(dir.path());
        let inst = svc.create_instance(fixture::native_document(), Format::Native).unwrap();
        let s = svc.open_session(&inst.id, &case_doc()).unwrap();
        assert_eq!(s.state, SessionState::AwaitingAnswer);
        assert_eq!(s.pending.as_ref().unwrap().symbol, 1);
        assert_eq!(svc.get_result(&s.id).unwrap_err().status_code(), 409);
        svc.answer(&s.id, "0").unwrap();
        let done = svc.answer(&s.id, "0").unwrap();
        assert!(done.state.is_terminal());
        let result = svc.get_result(&s.id).unwrap();
        assert_eq!(result.explanation.intent.label.unwrap().as_str(), "op_00");
        assert_eq!(svc.answer(&s.id, "1").unwrap_err().status_code(), 409);
    }

    #[test]
    fn decided_and_invalid_requests_finish_at_once() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, _) = service(dir.path());
        let inst = svc.create_instance(fixture::native_document(), Format::Native).unwrap();
        let mut doc = case_doc();
        doc.eta = TriState::True;
        doc.theta = TriState::True;
        let s = svc.open_session(&inst.id, &doc).unwrap();
        assert_eq!(s.state, SessionState::Done);
        assert!(s.history.events().is_empty());
        assert_eq!(s.result.unwrap().schedule.unwrap().makespan(), 21);

        let bad = RequestDoc {
            task: 99,
            desired_start: Some(4),
            ..case_doc()
        };
        let s = svc.open_session(&inst.id, &bad).unwrap();
        assert_eq!(s.state, SessionState::Failed);
        let r = s.result.unwrap();
        assert_eq!(r.status, RescheduleStatus::InvalidRequest);
        assert!(r.explanation.validity.contains(&"result(invalid_task)".to_string()));
    }

    #[test]
    fn idle_sessions_expire_on_access() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, clock) = service(dir.path());
        let inst = svc.create_instance(fixture::native_document(), Format::Native).unwrap();
        let s = svc.open_session(&inst.id, &case_doc()).unwrap();
        clock.advance(Duration::from_secs(61));
        let view = svc.get_session(&s.id).unwrap();
        assert_eq!(view.state, SessionState::Failed);
        let r = svc.get_result(&s.id).unwrap();
        assert_eq!(r.status, RescheduleStatus::InteractionTimeout);
        assert_eq!(r.explanation.narrative, "timeout");
    }

    #[test]
    fn handlers_are_deterministic_on_stored_state() {
        let dir = tempfile::tempdir().unwrap();
        let (svc, _) = service(dir.path());
        let inst = svc.create_instance(fixture::native_document(), Format::Native).unwrap();
        let s = svc.open_session(&inst.id, &case_doc()).unwrap();
        let stored: SessionRecord = svc.store().get(Kind::Session, &s.id).unwrap();
        let a = svc.answer(&s.id, "1").unwrap();
        svc.store().put(Kind::Session, &s.id, &stored).unwrap();
        let b = svc.answer(&s.id, "1").unwrap();
        assert_eq!(serde_json::to_value(&a).unwrap(), serde_json::to_value(&b).unwrap());
    }
}
