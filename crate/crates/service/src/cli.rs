//! The `resched` command line.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use resched_core::fixture;
use resched_core::intent::{
    parse_answer, IntentConfig, ManualClock, RescheduleRequest, Responder, ScriptedResponder, TriState, ANSWER_PROMPT,
};
use resched_core::model::{parse_instance, FixedAssignments, Format, Instance, ResourceId, Time};
use resched_core::pipeline::{
    dispatch, DispatchConfig, FixScope, PreprocessConfig, RescheduleResult, RescheduleStatus,
};
use resched_core::solver::{solve, SolveConfig, SolveStatus};

use crate::api::{Service, UnixClock};
use crate::store::Store;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "resched",
    version,
    about = "Intent-aware single-task rescheduling for RCPSP instances"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Native,
    PsplibSm,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Native => Format::Native,
            FormatArg::PsplibSm => Format::PsplibSm,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FixScopeArg {
    Predecessors,
    AllNonflex,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance to optimality and print the schedule.
    Solve {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "native")]
        format: FormatArg,
        /// Solver time limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Reschedule one task of an instance against its optimal baseline.
    Reschedule {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "native")]
        format: FormatArg,
        #[arg(long)]
        task: usize,
        /// Desired start; defaults to the baseline start.
        #[arg(long)]
        time: Option<Time>,
        /// New demand as `RESOURCE=AMOUNT`; repeatable.
        #[arg(long = "resource", value_parser = parse_resource)]
        resources: Vec<(ResourceId, u32)>,
        /// 1 lets other tasks move, 0 keeps them local.
        #[arg(long, value_parser = parse_flag)]
        scope: Option<bool>,
        /// 1 keeps the task's precedences, 0 detaches it.
        #[arg(long, value_parser = parse_flag)]
        precedence: Option<bool>,
        /// Ask missing flags on the terminal.
        #[arg(long)]
        interactive: bool,
        /// Scripted answers for missing flags, in order; repeatable.
        #[arg(long = "answer")]
        answers: Vec<String>,
        #[arg(long, value_enum, default_value = "predecessors")]
        fix_scope: FixScopeArg,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "RESCHED_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "RESCHED_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        /// Seconds a question waits for an answer before the session expires.
        #[arg(long, env = "RESCHED_EXPIRY", default_value_t = 60)]
        expiry: u64,
        /// Seconds allowed for a whole dialogue.
        #[arg(long, env = "RESCHED_DIALOGUE_LIMIT", default_value_t = 300)]
        dialogue_limit: u64,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
    /// Re-run a recorded transcript and check that it reproduces.
    Replay {
        transcript: PathBuf,
        /// Instance the transcript was recorded on; defaults to the bundled fixture.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "native")]
        format: FormatArg,
        /// Desired start for resource requests; defaults to the baseline start.
        #[arg(long)]
        time: Option<Time>,
    },
}

fn parse_resource(s: &str) -> Result<(ResourceId, u32), String> {
    let (r, a) = s
        .split_once('=')
        .ok_or_else(|| format!("expected RESOURCE=AMOUNT, got `{s}`"))?;
    let r = r.trim().parse().map_err(|_| format!("bad resource id `{r}`"))?;
    let a = a.trim().parse().map_err(|_| format!("bad amount `{a}`"))?;
    Ok((r, a))
}

fn parse_flag(s: &str) -> Result<bool, String> {
    parse_answer(s).ok_or_else(|| format!("expected 0 or 1, got `{s}`"))
}

/// Reads answers from a terminal, echoing prompts the way the dialogue
/// transcript shows them.
pub struct TerminalResponder<'a> {
    input: &'a mut dyn BufRead,
    output: &'a mut dyn Write,
}

impl<'a> TerminalResponder<'a> {
    pub fn new(input: &'a mut dyn BufRead, output: &'a mut dyn Write) -> Self {
        Self { input, output }
    }
}

impl Responder for TerminalResponder<'_> {
    fn respond(&mut self, _symbol: usize, question: &str, _wait: Duration) -> Option<String> {
        let _ = write!(self.output, "{question}\n{ANSWER_PROMPT}");
        let _ = self.output.flush();
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => {
                let answer = line.trim_end_matches(['\r', '\n']).to_string();
                if parse_answer(&answer).is_none() {
                    let _ = writeln!(self.output, "Invalid answer: {answer}\n");
                }
                Some(answer)
            }
        }
    }
}

struct Io<'a> {
    input: &'a mut dyn BufRead,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let mut io = Io { input, out, err };
    match cli.command {
        Command::Solve {
            file,
            format,
            time_limit,
        } => cmd_solve(&mut io, &file, format.into(), time_limit),
        Command::Reschedule {
            file,
            format,
            task,
            time,
            resources,
            scope,
            precedence,
            interactive,
            answers,
            fix_scope,
        } => {
            let inst = match load(&mut io, &file, format.into()) {
                Ok(i) => i,
                Err(code) => return code,
            };
            let Some(baseline) = baseline(&mut io, &inst) else {
                return EXIT_INFEASIBLE;
            };
            let mut req = RescheduleRequest::new(task, time.unwrap_or_else(|| default_start(&baseline, task)));
            for (r, a) in resources {
                req = req.with_resource(r, a);
            }
            let scope = TriState::from(scope);
            let precedence = TriState::from(precedence);
            (req.delta, req.eta, req.rho, req.theta) = (scope, scope, precedence, precedence);
            let cfg = DispatchConfig {
                preprocess: PreprocessConfig {
                    fix_scope: match fix_scope {
                        FixScopeArg::Predecessors => FixScope::Predecessors,
                        FixScopeArg::AllNonflex => FixScope::AllNonflex,
                    },
                },
                ..DispatchConfig::default()
            };
            let result = if interactive {
                let mut responder = TerminalResponder::new(io.input, io.out);
                dispatch(&inst, &baseline, &req, &mut responder, &cfg)
            } else {
                let mut responder = ScriptedResponder::new(answers);
                dispatch(&inst, &baseline, &req, &mut responder, &cfg)
            };
            report(&mut io, &result, !interactive)
        }
        Command::Serve {
            port,
            data_dir,
            expiry,
            dialogue_limit,
            host,
        } => cmd_serve(&mut io, SocketAddr::new(host, port), &data_dir, expiry, dialogue_limit),
        Command::Replay {
            transcript,
            instance,
            format,
            time,
        } => cmd_replay(&mut io, &transcript, instance.as_deref(), format.into(), time),
    }
}

fn default_start(baseline: &resched_core::model::Schedule, task: usize) -> Time {
    if task < baseline.task_count() {
        baseline.start(task)
    } else {
        0
    }
}

fn load(io: &mut Io<'_>, file: &Path, format: Format) -> Result<Instance, i32> {
    let text = std::fs::read_to_string(file).map_err(|e| {
        let _ = writeln!(io.err, "cannot read {}: {e}", file.display());
        EXIT_INVALID
    })?;
    parse_instance(&text, format).map_err(|e| {
        let _ = writeln!(io.err, "{}: {e}", file.display());
        EXIT_INVALID
    })
}

fn baseline(io: &mut Io<'_>, inst: &Instance) -> Option<resched_core::model::Schedule> {
    let r = solve(inst, &FixedAssignments::new(), &SolveConfig::default()).expect("validated instance");
    if r.status != SolveStatus::Optimal {
        let _ = writeln!(
            io.err,
            "baseline: no feasible schedule within horizon {}",
            inst.horizon()
        );
        return None;
    }
    r.schedule
}

fn cmd_solve(io: &mut Io<'_>, file: &Path, format: Format, time_limit: Option<f64>) -> i32 {
    let inst = match load(io, file, format) {
        Ok(i) => i,
        Err(code) => return code,
    };
    let mut cfg = SolveConfig::default();
    if let Some(secs) = time_limit.filter(|s| *s > 0.0) {
        cfg = cfg.with_time_limit(Duration::from_secs_f64(secs));
    }
    let r = solve(&inst, &FixedAssignments::new(), &cfg).expect("validated instance");
    let status = match r.status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Timeout => "timeout",
    };
    let doc = serde_json::json!({
        "status": status,
        "schedule": r.schedule,
        "nodes_explored": r.nodes_explored,
    });
    let _ = writeln!(io.out, "{}", serde_json::to_string_pretty(&doc).expect("json"));
    match r.status {
        SolveStatus::Optimal => EXIT_OK,
        _ => EXIT_INFEASIBLE,
    }
}

fn exit_code(status: RescheduleStatus) -> i32 {
    match status {
        RescheduleStatus::Ok => EXIT_OK,
        RescheduleStatus::InvalidRequest => EXIT_INVALID,
        RescheduleStatus::Infeasible | RescheduleStatus::InteractionTimeout | RescheduleStatus::SolverTimeout => {
            EXIT_INFEASIBLE
        }
    }
}

fn report(io: &mut Io<'_>, result: &RescheduleResult, with_transcript: bool) -> i32 {
    if with_transcript {
        let _ = write!(io.err, "{}", result.explanation.transcript);
    }
    let _ = writeln!(io.err, "{}", result.explanation.narrative.trim_end());
    let _ = writeln!(io.out, "{}", serde_json::to_string_pretty(result).expect("json"));
    exit_code(result.status)
}

fn cmd_serve(io: &mut Io<'_>, addr: SocketAddr, data_dir: &Path, expiry: u64, dialogue_limit: u64) -> i32 {
    let store = match Store::open(data_dir) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(io.err, "cannot open data directory: {e}");
            return EXIT_INVALID;
        }
    };
    let cfg = DispatchConfig {
        intent: IntentConfig {
            time_limit: Duration::from_secs(dialogue_limit),
            answer_wait: Duration::from_secs(expiry),
            clock: Arc::new(UnixClock),
        },
        ..DispatchConfig::default()
    };
    let service = Arc::new(Service::new(store, cfg));
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    match runtime.block_on(crate::http::serve(service, addr)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(io.err, "server error: {e}");
            EXIT_INVALID
        }
    }
}

/// The request and answers recorded in a transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedDialogue {
    pub task: usize,
    pub start: Option<Time>,
    pub resources: Vec<(ResourceId, u32)>,
    /// `None` for a question that went unanswered.
    pub answers: Vec<Option<String>>,
}

pub fn parse_transcript(text: &str) -> Result<RecordedDialogue, String> {
    let header = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("Result:"))
        .ok_or("transcript must start with a `Result:` line")?;
    let mut task = None;
    let mut start = None;
    let mut resources = Vec::new();
    for atom in header.split_whitespace() {
        let Some(args) = atom.strip_prefix("request(").and_then(|a| a.strip_suffix(')')) else {
            continue;
        };
        let nums: Vec<u32> = args
            .split(',')
            .map(|n| n.trim().parse().map_err(|_| format!("bad atom `{atom}`")))
            .collect::<Result<_, _>>()?;
        match nums[..] {
            [t, s] => {
                task = Some(t as usize);
                start = Some(s);
            }
            [t, r, a] => {
                task = Some(t as usize);
                resources.push((r, a));
            }
            _ => return Err(format!("unexpected atom `{atom}`")),
        }
    }
    let task = task.ok_or("no request atom in the `Result:` line")?;
    let mut answers = Vec::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        if let Some(a) = line.strip_prefix(ANSWER_PROMPT) {
            let silent = a.is_empty() && lines.peek() == Some(&"No answer");
            answers.push(if silent { None } else { Some(a.to_string()) });
        }
    }
    Ok(RecordedDialogue {
        task,
        start,
        resources,
        answers,
    })
}

fn cmd_replay(io: &mut Io<'_>, path: &Path, instance: Option<&Path>, format: Format, time: Option<Time>) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(io.err, "cannot read {}: {e}", path.display());
            return EXIT_INVALID;
        }
    };
    let recorded = match parse_transcript(&text) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(io.err, "{}: {e}", path.display());
            return EXIT_INVALID;
        }
    };
    let inst = match instance {
        Some(file) => match load(io, file, format) {
            Ok(i) => i,
            Err(code) => return code,
        },
        None => fixture::instance(),
    };
    let Some(baseline) = baseline(io, &inst) else {
        return EXIT_INFEASIBLE;
    };
    let start = time
        .or(recorded.start)
        .unwrap_or_else(|| default_start(&baseline, recorded.task));
    let mut req = RescheduleRequest::new(recorded.task, start);
    for &(r, a) in &recorded.resources {
        req = req.with_resource(r, a);
    }
    let clock = Arc::new(ManualClock::new());
    let cfg = DispatchConfig {
        intent: IntentConfig {
            clock: clock.clone(),
            ..IntentConfig::default()
        },
        ..DispatchConfig::default()
    };
    let mut responder = ScriptedResponder::with_silences(recorded.answers).with_clock(clock, Duration::from_secs(1));
    let result = dispatch(&inst, &baseline, &req, &mut responder, &cfg);
    let code = report(io, &result, false);
    if result.explanation.transcript != text {
        let _ = writeln!(
            io.err,
            "transcript differs from the recording:\n{}",
            result.explanation.transcript
        );
        return EXIT_INVALID;
    }
    let _ = writeln!(io.err, "transcript reproduced");
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resource_and_flag_arguments() {
        assert_eq!(parse_resource("1=2"), Ok((1, 2)));
        assert!(parse_resource("1:2").is_err());
        assert_eq!(parse_flag("0"), Ok(false));
        assert!(parse_flag("yes").is_err());
    }

    #[test]
    fn transcript_parsing_recovers_requests_and_answers() {
        let rec = parse_transcript(include_str!("../../core/fixtures/case_transcript.txt")).unwrap();
        assert_eq!(rec.task, 4);
        assert_eq!(rec.resources, vec![(1, 1)]);
        assert_eq!(rec.start, None);
        let answers: Vec<_> = rec.answers.iter().map(|a| a.as_deref().unwrap()).collect();
        assert_eq!(answers, ["Yes", "2", "1", "1"]);
        assert!(parse_transcript("nothing").is_err());
    }

    #[test]
    fn terminal_responder_echoes_invalid_answers() {
        let mut input: &[u8] = b"Yes\n1\n";
        let mut out = Vec::new();
        let mut r = TerminalResponder::new(&mut input, &mut out);
        assert_eq!(r.respond(1, "Q?", Duration::ZERO).as_deref(), Some("Yes"));
        assert_eq!(r.respond(1, "Q?", Duration::ZERO).as_deref(), Some("1"));
        assert_eq!(r.respond(1, "Q?", Duration::ZERO), None);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "Q?\n?[1, 0]:Invalid answer: Yes\n\nQ?\n?[1, 0]:Q?\n?[1, 0]:");
    }
}
