//! Acceptance suite: one line per criterion, non-zero exit on any failure.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use resched_core::fixture;
use resched_core::generate::{random_fixed, random_instance, GeneratorParams};
use resched_core::intent::{
    interpret_intention, parse_answer, validate_resource_request, validate_time_request, DecisionTree, EvalOutcome,
    IntentConfig, InterpretationStatus, ManualClock, RequestType, RescheduleRequest, ScriptedResponder, TriState,
    Verdict,
};
use resched_core::model::{check_schedule, FixedAssignments, Format, Instance, Schedule, TaskId};
use resched_core::pipeline::{
    dispatch, preprocess, DispatchConfig, InfeasibleReason, PreprocessConfig, PreprocessOutcome, RescheduleStatus,
    TargetChange,
};
use resched_core::solver::{brute_force_solve, solve, SolveConfig};
use resched_service::api::{ApiError, RequestDoc, Service, SessionState};
use resched_service::store::{CrashPoint, FaultInjector, Kind, Store, StoreError};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const CASE_SCRIPT: [&str; 4] = ["Yes", "2", "1", "1"];
const GOLDEN: &str = include_str!("../../core/fixtures/case_transcript.txt");

fn baseline(inst: &Instance) -> Option<Schedule> {
    solve(inst, &FixedAssignments::new(), &SolveConfig::default())
        .ok()?
        .schedule
}

fn manual_dispatch() -> (Arc<ManualClock>, DispatchConfig) {
    let clock = Arc::new(ManualClock::new());
    let cfg = DispatchConfig {
        intent: IntentConfig {
            clock: clock.clone(),
            ..IntentConfig::default()
        },
        ..DispatchConfig::default()
    };
    (clock, cfg)
}

fn case_request() -> RescheduleRequest {
    RescheduleRequest::new(fixture::CASE_TASK, fixture::CASE_START)
        .with_resource(fixture::CASE_RESOURCE, fixture::CASE_AMOUNT)
}

fn oracle_equivalence() -> Check {
    let params = GeneratorParams::default();
    let started = Instant::now();
    let (mut total, mut feasible) = (0, 0);
    for seed in 0..400u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, &params);
        let fixed = if seed % 3 == 0 {
            random_fixed(&mut rng, &inst, 2)
        } else {
            FixedAssignments::new()
        };
        let fast = solve(&inst, &fixed, &SolveConfig::default()).map_err(|e| e.to_string())?;
        let slow = brute_force_solve(&inst, &fixed).map_err(|e| e.to_string())?;
        ensure!(
            fast.status == slow.status,
            "seed {seed}: status {:?} vs {:?}",
            fast.status,
            slow.status
        );
        ensure!(
            fast.makespan() == slow.makespan(),
            "seed {seed}: makespan {:?} vs {:?}",
            fast.makespan(),
            slow.makespan()
        );
        if let Some(s) = &fast.schedule {
            ensure!(
                check_schedule(&inst, s, &fixed).ok,
                "seed {seed}: schedule fails validation"
            );
            feasible += 1;
        }
        total += 1;
    }
    let elapsed = started.elapsed();
    ensure!(feasible >= 200, "only {feasible} feasible instances");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!(
        "{total} instances, {feasible} feasible, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn fixture_derivation() -> Check {
    let candidates = fixture::search_capacities();
    let first = candidates.iter().find(|c| c.matches());
    let chosen = match first {
        Some(c) => c.clone(),
        None => candidates
            .iter()
            .min_by_key(|c| c.gap())
            .cloned()
            .ok_or("empty search")?,
    };
    ensure!(
        chosen.capacities == fixture::FIXTURE_CAPACITIES,
        "search picks {:?}, fixture pins {:?}",
        chosen.capacities,
        fixture::FIXTURE_CAPACITIES
    );
    ensure!(
        chosen.matches(),
        "nearest vector {:?} has gap {}",
        chosen.capacities,
        chosen.gap()
    );
    let matching = candidates.iter().filter(|c| c.matches()).count();
    Ok(format!(
        "C={:?}, {matching} of {} vectors match",
        chosen.capacities,
        candidates.len()
    ))
}

fn case_study_end_to_end() -> Check {
    let inst = fixture::instance();
    let base = baseline(&inst).ok_or("no baseline")?;
    let (clock, cfg) = manual_dispatch();
    let mut r = ScriptedResponder::new(CASE_SCRIPT).with_clock(clock, Duration::from_secs(2));
    let out = dispatch(&inst, &base, &case_request(), &mut r, &cfg);
    ensure!(out.status == RescheduleStatus::Ok, "status {}", out.status);
    let e = &out.explanation;
    let label = e.intent.label.as_ref().map(|l| l.as_str().to_string());
    ensure!(label.as_deref() == Some("op_11"), "intent {label:?}");
    let s = out.schedule.as_ref().ok_or("no schedule")?;
    ensure!(s.start(4) == 4, "task 4 starts at {}", s.start(4));
    let pre = e.preprocessing.as_ref().ok_or("no preprocessing summary")?;
    let usage = pre.requirement_changes.iter().find(|c| c.resource == 1).map(|c| c.to);
    ensure!(usage == Some(1), "resource 1 usage {usage:?}");
    let recorded = fixture::evaluate_capacities(fixture::FIXTURE_CAPACITIES).rescheduled_makespan;
    ensure!(
        Some(s.makespan()) == recorded && s.makespan() == 21,
        "makespan {} (fixture {recorded:?})",
        s.makespan()
    );
    let case = fixture::case_study_instance(&inst);
    ensure!(
        check_schedule(&case, s, &[(4, 4)].into_iter().collect()).ok,
        "schedule fails validation"
    );
    ensure!(e.transcript == GOLDEN, "transcript differs:\n{}", e.transcript);
    for needle in [
        "Invalid answer: Yes",
        "Invalid answer: 2",
        "sym(1,\"true\")",
        "intent(op_11)",
    ] {
        ensure!(e.transcript.contains(needle), "transcript lacks {needle}");
    }
    Ok(format!("op_11, task 4 at 4, makespan {}", s.makespan()))
}

/// Distinct symbols asked and number of accepted answers.
fn queries(
    script: Vec<String>,
    req: &RescheduleRequest,
    inst: &Instance,
    base: &Schedule,
) -> (usize, usize, InterpretationStatus) {
    let (_, cfg) = manual_dispatch();
    let mut r = ScriptedResponder::new(script);
    let out = interpret_intention(base, inst, req, &mut r, &cfg.intent);
    let symbols: BTreeSet<usize> = out.history.events().iter().map(|e| e.symbol).collect();
    let accepted = out.history.events().iter().filter(|e| e.value.is_some()).count();
    (symbols.len(), accepted, out.status)
}

fn query_bound() -> Check {
    let inst = fixture::instance();
    let base = baseline(&inst).ok_or("no baseline")?;
    let requests = [case_request(), RescheduleRequest::new(4, 6)];
    let mut scripts = 0;
    for req in &requests {
        for a in ["0", "1"] {
            for b in ["0", "1"] {
                let (asked, accepted, status) = queries(vec![a.into(), b.into()], req, &inst, &base);
                ensure!(status == InterpretationStatus::Resolved, "{a}{b}: {status:?}");
                ensure!(
                    asked == 2 && accepted == 2,
                    "{a}{b}: {asked} symbols, {accepted} answers"
                );
                scripts += 1;
            }
        }
    }
    let noise = ["Yes", "2", "maybe", "no", "11", "-1", "true", "x"];
    for tok in noise {
        ensure!(parse_answer(tok).is_none(), "noise token {tok} parses");
    }
    let mut rng = StdRng::seed_from_u64(7);
    for i in 0..50 {
        let mut script = Vec::new();
        for _ in 0..2 {
            for _ in 0..rng.gen_range(1..=4) {
                script.push(noise.choose(&mut rng).unwrap().to_string());
            }
            script.push(if rng.gen() { "1" } else { "0" }.to_string());
        }
        let req = &requests[i % 2];
        let (asked, accepted, status) = queries(script.clone(), req, &inst, &base);
        ensure!(status == InterpretationStatus::Resolved, "{script:?}: {status:?}");
        ensure!(
            asked == 2 && accepted == 2,
            "{script:?}: {asked} symbols, {accepted} answers"
        );
        scripts += 1;
    }
    Ok(format!("{scripts} scripts, 2 distinct queries each"))
}

fn intent_labels() -> Check {
    let inst = fixture::instance();
    let base = baseline(&inst).ok_or("no baseline")?;
    for a1 in [false, true] {
        for a2 in [false, true] {
            let expected = format!("op_{}{}", a2 as u8, a1 as u8);
            let mut tree = DecisionTree::new(2, None).map_err(|e| e.to_string())?;
            tree.assign(1, a1).map_err(|e| e.to_string())?;
            tree.assign(2, a2).map_err(|e| e.to_string())?;
            match tree.eval() {
                EvalOutcome::Intent { label, .. } => {
                    ensure!(label.as_str() == expected, "tree gives {}", label.as_str())
                }
                other => return Err(format!("tree undecided: {other:?}")),
            }
            let (_, cfg) = manual_dispatch();
            let script = [(a1 as u8).to_string(), (a2 as u8).to_string()];
            let out = interpret_intention(
                &base,
                &inst,
                &case_request(),
                &mut ScriptedResponder::new(script),
                &cfg.intent,
            );
            let got = out.label.map(|l| l.as_str().to_string());
            ensure!(
                got.as_deref() == Some(expected.as_str()),
                "dialogue ({a1},{a2}) gives {got:?}"
            );
        }
    }
    Ok("op_00 op_01 op_10 op_11".into())
}

fn validator_conformance() -> Check {
    let inst = fixture::instance();
    let ok = validate_resource_request(&inst, 4, 1, 1);
    ensure!(
        ok.summary() == "request(4,1,1) result(valid_request)",
        "got {}",
        ok.summary()
    );
    let amount = validate_resource_request(&inst, 4, 1, 4);
    ensure!(amount.verdict == Verdict::InvalidAmount, "amount 4: {}", amount.verdict);
    ensure!(
        validate_resource_request(&inst, 4, 1, 3).is_valid(),
        "amount 3 rejected"
    );
    let task = validate_resource_request(&inst, 99, 1, 1);
    ensure!(task.verdict == Verdict::InvalidTask, "task 99: {}", task.verdict);
    ensure!(
        validate_time_request(&inst, 99, 4).verdict == Verdict::InvalidTask,
        "time request for task 99"
    );
    let total = inst.total_duration();
    ensure!(
        validate_time_request(&inst, 4, total).is_valid(),
        "time {total} rejected"
    );
    let late = validate_time_request(&inst, 4, total + 1);
    ensure!(
        late.verdict == Verdict::InvalidTime,
        "time {}: {}",
        total + 1,
        late.verdict
    );
    Ok(format!(
        "valid_request, invalid_amount, invalid_task, invalid_time (sum of durations {total})"
    ))
}

fn reachability(edges: &BTreeSet<(TaskId, TaskId)>, n: usize) -> Vec<Vec<bool>> {
    let mut reach = vec![vec![false; n]; n];
    for &(i, j) in edges {
        reach[i][j] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    reach[i][j] |= reach[k][j];
                }
            }
        }
    }
    reach
}

fn preprocess_surgery() -> Check {
    let params = GeneratorParams {
        edge_probability: 0.4,
        ..GeneratorParams::default()
    };
    let cfg = PreprocessConfig::default();
    let (mut detached, mut linked) = (0, 0);
    for seed in 0..10_000u64 {
        if detached >= 100 {
            break;
        }
        let mut rng = StdRng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, &params);
        let Some(base) = baseline(&inst) else { continue };
        let t = rng.gen_range(1..=inst.real_task_count());
        let start = rng.gen_range(0..=inst.horizon() - inst.duration(t));
        let resources = inst
            .resources()
            .iter()
            .map(|r| (r.id, rng.gen_range(0..=r.capacity)))
            .collect();
        let b1 = if rng.gen() { TriState::True } else { TriState::False };
        let change = TargetChange {
            task: t,
            start,
            resources,
        };
        let out = preprocess(&inst, &base, &change, RequestType::Resource, b1, TriState::False, &cfg)
            .map_err(|e| e.to_string())?;
        let Some(m) = out.modified() else { continue };

        let s0 = inst.precedences();
        let preds: Vec<_> = s0.iter().filter(|e| e.1 == t).map(|e| e.0).collect();
        let succs: Vec<_> = s0.iter().filter(|e| e.0 == t).map(|e| e.1).collect();
        let incident: BTreeSet<_> = s0.iter().copied().filter(|&(i, j)| i == t || j == t).collect();
        let bridges: BTreeSet<_> = preds.iter().flat_map(|&i| succs.iter().map(move |&j| (i, j))).collect();
        let removed: BTreeSet<_> = m.removed_edges.iter().copied().collect();
        ensure!(
            removed == incident,
            "seed {seed}: removed {removed:?}, incident {incident:?}"
        );
        let added: BTreeSet<_> = m.added_edges.iter().copied().collect();
        let new_bridges: BTreeSet<_> = bridges.difference(s0).copied().collect();
        ensure!(
            added == new_bridges,
            "seed {seed}: added {added:?}, bridges {bridges:?}"
        );
        let mut expected: BTreeSet<_> = s0.difference(&incident).copied().collect();
        expected.extend(bridges.iter().copied());
        ensure!(
            m.instance.precedences() == &expected,
            "seed {seed}: precedence set differs"
        );
        let n = inst.task_count();
        let (before, after) = (reachability(s0, n), reachability(m.instance.precedences(), n));
        for i in (1..n - 1).filter(|&i| i != t) {
            for j in (1..n - 1).filter(|&j| j != t) {
                ensure!(
                    before[i][j] == after[i][j],
                    "seed {seed}: reachability {i}->{j} changed"
                );
            }
        }
        detached += 1;

        let pred_finish = preds.iter().map(|&i| base.start(i) + inst.duration(i)).max();
        if let Some(finish) = pred_finish.filter(|&f| f > 0) {
            let early = TargetChange {
                start: rng.gen_range(0..finish),
                ..change.clone()
            };
            let out = preprocess(&inst, &base, &early, RequestType::Resource, b1, TriState::True, &cfg)
                .map_err(|e| e.to_string())?;
            let ok = matches!(
                out,
                PreprocessOutcome::Infeasible {
                    reason: InfeasibleReason::PredecessorFinish,
                    ..
                }
            );
            ensure!(
                ok,
                "seed {seed}: start {} before finish {finish} not rejected",
                early.start
            );
            linked += 1;
        }
    }
    ensure!(detached >= 100, "only {detached} instances checked");
    ensure!(linked > 0, "no predecessor-finish cases generated");
    Ok(format!("{detached} detached, {linked} predecessor-finish rejections"))
}

fn service(dir: &Path, faults: Option<Arc<FaultInjector>>) -> Result<Service, StoreError> {
    let mut store = Store::open(dir)?;
    if let Some(f) = faults {
        store = store.with_faults(f);
    }
    let clock = Arc::new(ManualClock::new());
    clock.set(Duration::from_secs(1_700_000_000));
    let cfg = DispatchConfig {
        intent: IntentConfig {
            clock,
            ..IntentConfig::default()
        },
        ..DispatchConfig::default()
    };
    Ok(Service::new(store, cfg))
}

/// Drives the case study from whatever state the store holds.
fn drive(svc: &Service) -> Result<(SessionState, Option<u32>, String), ApiError> {
    let instances = svc.store().list(Kind::Instance)?;
    let instance = match instances.first() {
        Some(id) => id.clone(),
        None => svc.create_instance(fixture::native_document(), Format::Native)?.id,
    };
    svc.solve_baseline(&instance)?;
    let doc: RequestDoc =
        serde_json::from_str(r#"{"task": 4, "desired_start": 4, "desired_resources": {"1": 1}}"#).unwrap();
    let session = match svc.session_ids()?.first() {
        Some(id) => svc.get_session(id)?,
        None => svc.open_session(&instance, &doc)?,
    };
    let mut view = session;
    while view.state == SessionState::AwaitingAnswer {
        let next = CASE_SCRIPT[view.history.answered().count()];
        view = svc.answer(&view.id, next)?;
    }
    let makespan = view
        .result
        .as_ref()
        .and_then(|r| r.schedule.as_ref())
        .map(|s| s.makespan());
    let transcript = svc.transcript(&view.id)?;
    Ok((view.state, makespan, transcript))
}

fn documents_parse(dir: &Path) -> Result<usize, String> {
    let mut n = 0;
    for sub in ["instances", "sessions"] {
        for entry in std::fs::read_dir(dir.join(sub)).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.extension().is_some_and(|x| x == "json") {
                let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
                serde_json::from_str::<serde_json::Value>(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                n += 1;
            }
        }
    }
    Ok(n)
}

fn crash_safety() -> Check {
    let mut crashes = 0;
    for point in [CrashPoint::BeforeWrite, CrashPoint::TornTemp, CrashPoint::BeforeRename] {
        for k in 0.. {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let faults = FaultInjector::after_writes(k, point);
            let svc = service(dir.path(), Some(faults.clone())).map_err(|e| e.to_string())?;
            let first = drive(&svc);
            if !faults.crashed() {
                let (state, makespan, _) = first.map_err(|e| e.to_string())?;
                ensure!(
                    state == SessionState::Done && makespan == Some(21),
                    "uninterrupted run ended {state:?}"
                );
                break;
            }
            ensure!(
                matches!(first, Err(ApiError::Storage(StoreError::Crashed))),
                "{point:?} #{k}: crash not surfaced"
            );
            drop(svc);
            documents_parse(dir.path()).map_err(|e| format!("{point:?} #{k}: {e}"))?;
            let svc = service(dir.path(), None).map_err(|e| e.to_string())?;
            let leftovers = std::fs::read_dir(dir.path().join("sessions"))
                .map_err(|e| e.to_string())?
                .filter_map(Result::ok)
                .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
                .count();
            ensure!(leftovers == 0, "{point:?} #{k}: temporary files survive reopening");
            let (state, makespan, transcript) =
                drive(&svc).map_err(|e| format!("{point:?} #{k}: resume failed: {e}"))?;
            ensure!(
                state == SessionState::Done && makespan == Some(21),
                "{point:?} #{k}: resumed to {state:?} {makespan:?}"
            );
            ensure!(
                transcript == GOLDEN,
                "{point:?} #{k}: resumed transcript differs:\n{transcript}"
            );
            ensure!(
                svc.session_ids().map_err(|e| e.to_string())?.len() <= 1,
                "{point:?} #{k}: duplicate sessions"
            );
            crashes += 1;
        }
    }
    Ok(format!(
        "{crashes} injected crashes, every session resumed to makespan 21"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("fixture derivation", fixture_derivation),
        ("case-study end-to-end", case_study_end_to_end),
        ("dialogue query bound", query_bound),
        ("intent labels", intent_labels),
        ("validator conformance", validator_conformance),
        ("preprocess surgery", preprocess_surgery),
        ("crash safety", crash_safety),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({detail}; {secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
