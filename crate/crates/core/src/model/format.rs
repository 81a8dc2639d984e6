//! Instance exchange formats.
//!
//! The native format is a JSON document:
//!
//! ```json
//! {
//!   "tasks": [
//!     { "id": 1, "duration": 5, "requirements": { "1": 3 }, "successors": [3] }
//!   ],
//!   "resources": [ { "id": 1, "capacity": 4 } ],
//!   "horizon": 35
//! }
//! ```
//!
//! Real task ids are `1..=n` and may appear in any order. `horizon` is
//! optional. The serializer emits tasks in id order, omits zero demands and
//! always writes the horizon, so output diffs cleanly.
//!
//! The `psplib-sm` reader accepts the single-mode PSPLIB `.sm` layout. Job 1
//! is the supersource and job `n+2` the supersink; they map onto the dummy
//! tasks and their edges are dropped.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{validate_instance, Instance, Resource, ResourceId, TaskId, Time, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Native,
    PsplibSm,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "native" | "json" => Ok(Format::Native),
            "psplib-sm" | "sm" => Ok(Format::PsplibSm),
            other => Err(format!("unknown instance format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid instance: {0}")]
    Semantic(ValidationReport),
}

impl ParseError {
    fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeDoc {
    tasks: Vec<NativeTask>,
    resources: Vec<Resource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<Time>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NativeTask {
    id: TaskId,
    duration: Time,
    #[serde(default)]
    requirements: BTreeMap<ResourceId, u32>,
    #[serde(default)]
    successors: Vec<TaskId>,
}

/// Parses an instance and validates it.
pub fn parse_instance(text: &str, format: Format) -> Result<Instance, ParseError> {
    let inst = match format {
        Format::Native => parse_native(text)?,
        Format::PsplibSm => parse_psplib(text)?,
    };
    let report = validate_instance(&inst);
    if report.ok {
        Ok(inst)
    } else {
        Err(ParseError::Semantic(report))
    }
}

fn parse_native(text: &str) -> Result<Instance, ParseError> {
    let doc: NativeDoc =
        serde_json::from_str(text).map_err(|e| ParseError::syntax(e.line(), e.column(), e.to_string()))?;
    let n = doc.tasks.len();
    let mut by_id: BTreeMap<TaskId, &NativeTask> = BTreeMap::new();
    for t in &doc.tasks {
        if t.id == 0 || t.id > n {
            return Err(ParseError::syntax(0, 0, format!("task id {} outside 1..={n}", t.id)));
        }
        if by_id.insert(t.id, t).is_some() {
            return Err(ParseError::syntax(0, 0, format!("duplicate task id {}", t.id)));
        }
    }
    let mut b = Instance::builder(doc.resources.clone());
    for t in by_id.values() {
        b.task(t.duration, t.requirements.iter().map(|(&r, &a)| (r, a)));
    }
    for t in by_id.values() {
        for &s in &t.successors {
            b.precedence(t.id, s);
        }
    }
    if let Some(h) = doc.horizon {
        b.horizon(h);
    }
    b.build().map_err(|e| ParseError::syntax(0, 0, e.to_string()))
}

/// Writes the canonical native document for an instance.
pub fn serialize_instance(inst: &Instance) -> String {
    let succ = inst.precedences();
    let tasks = inst
        .real_tasks()
        .map(|j| NativeTask {
            id: j,
            duration: inst.duration(j),
            requirements: inst
                .resources()
                .iter()
                .enumerate()
                .filter_map(|(r, res)| {
                    let a = inst.requirement(j, r);
                    (a > 0).then_some((res.id, a))
                })
                .collect(),
            successors: succ.range((j, 0)..(j + 1, 0)).map(|&(_, s)| s).collect(),
        })
        .collect();
    let doc = NativeDoc {
        tasks,
        resources: inst.resources().to_vec(),
        horizon: Some(inst.horizon()),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("instance document serializes");
    text.push('\n');
    text
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate().peekable(),
        }
    }

    /// Skips forward to the first line starting with `prefix`.
    fn seek(&mut self, prefix: &str) -> Result<(usize, &'a str), ParseError> {
        for (i, line) in self.inner.by_ref() {
            if line.trim_start().starts_with(prefix) {
                return Ok((i + 1, line));
            }
        }
        Err(ParseError::syntax(0, 0, format!("missing `{prefix}` section")))
    }

    /// Next line that is neither blank nor a `*`/`-` rule.
    fn content(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('*') || t.starts_with('-') {
                continue;
            }
            return Some((i + 1, line));
        }
        None
    }
}

fn after_colon(line_no: usize, line: &str) -> Result<u64, ParseError> {
    let col = line
        .find(':')
        .ok_or_else(|| ParseError::syntax(line_no, 1, "expected `:`"))?;
    let rest = line[col + 1..].trim();
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().map_err(|_| {
        ParseError::syntax(
            line_no,
            col + 2,
            format!("expected an integer after `:`, found `{rest}`"),
        )
    })
}

fn numbers(line_no: usize, line: &str) -> Result<Vec<u64>, ParseError> {
    let mut out = Vec::new();
    let mut pos = 0;
    for tok in line.split_whitespace() {
        let col = line[pos..].find(tok).map(|o| pos + o).unwrap_or(pos);
        pos = col + tok.len();
        out.push(
            tok.parse()
                .map_err(|_| ParseError::syntax(line_no, col + 1, format!("expected an integer, found `{tok}`")))?,
        );
    }
    Ok(out)
}

fn parse_psplib(text: &str) -> Result<Instance, ParseError> {
    let mut lines = Lines::new(text);
    let (ln, line) = lines.seek("jobs")?;
    let jobs = after_colon(ln, line)? as usize;
    if jobs < 2 {
        return Err(ParseError::syntax(ln, 1, "at least the two dummy jobs are required"));
    }
    let (ln, line) = lines.seek("horizon")?;
    let horizon = after_colon(ln, line)? as Time;
    let (ln, line) = lines.seek("- renewable")?;
    let renewable = after_colon(ln, line)? as usize;
    let (ln, line) = lines.seek("- nonrenewable")?;
    if after_colon(ln, line)? != 0 {
        return Err(ParseError::syntax(ln, 1, "nonrenewable resources are not supported"));
    }

    lines.seek("PRECEDENCE RELATIONS")?;
    lines.seek("jobnr.")?;
    let mut successors: Vec<Vec<usize>> = vec![Vec::new(); jobs];
    for k in 0..jobs {
        let (ln, line) = lines
            .content()
            .ok_or_else(|| ParseError::syntax(0, 0, "truncated precedence table"))?;
        let nums = numbers(ln, line)?;
        if nums.len() < 3 || nums[0] as usize != k + 1 {
            return Err(ParseError::syntax(
                ln,
                1,
                format!("expected precedence row for job {}", k + 1),
            ));
        }
        if nums[1] != 1 {
            return Err(ParseError::syntax(ln, 1, "only single-mode instances are supported"));
        }
        let count = nums[2] as usize;
        if nums.len() != 3 + count {
            return Err(ParseError::syntax(
                ln,
                1,
                format!("job {} lists {count} successors but has {}", k + 1, nums.len() - 3),
            ));
        }
        for &s in &nums[3..] {
            if s == 0 || s as usize > jobs {
                return Err(ParseError::syntax(ln, 1, format!("successor {s} out of range")));
            }
            successors[k].push(s as usize - 1);
        }
    }

    lines.seek("REQUESTS/DURATIONS")?;
    lines.seek("jobnr.")?;
    let mut durations = vec![0 as Time; jobs];
    let mut demand = vec![vec![0u32; renewable]; jobs];
    for k in 0..jobs {
        let (ln, line) = lines
            .content()
            .ok_or_else(|| ParseError::syntax(0, 0, "truncated request table"))?;
        let nums = numbers(ln, line)?;
        if nums.len() != 3 + renewable || nums[0] as usize != k + 1 {
            return Err(ParseError::syntax(
                ln,
                1,
                format!("expected request row for job {}", k + 1),
            ));
        }
        durations[k] = nums[2] as Time;
        for r in 0..renewable {
            demand[k][r] = nums[3 + r] as u32;
        }
    }

    lines.seek("RESOURCEAVAILABILITIES")?;
    lines
        .content()
        .ok_or_else(|| ParseError::syntax(0, 0, "missing availability header"))?;
    let (ln, line) = lines
        .content()
        .ok_or_else(|| ParseError::syntax(0, 0, "missing availability row"))?;
    let caps = numbers(ln, line)?;
    if caps.len() != renewable {
        return Err(ParseError::syntax(ln, 1, format!("expected {renewable} capacities")));
    }

    let resources = caps
        .iter()
        .enumerate()
        .map(|(r, &c)| Resource {
            id: r as ResourceId + 1,
            capacity: c as u32,
        })
        .collect();
    let mut b = Instance::builder(resources);
    for k in 1..jobs - 1 {
        b.task(
            durations[k],
            demand[k]
                .iter()
                .enumerate()
                .filter(|(_, &a)| a > 0)
                .map(|(r, &a)| (r as ResourceId + 1, a)),
        );
    }
    for (k, list) in successors.iter().enumerate() {
        for &s in list {
            b.precedence(k, s);
        }
    }
    b.horizon(horizon);
    b.build().map_err(|e| ParseError::syntax(0, 0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_reports_line_and_column() {
        let err = parse_instance("{\n  \"tasks\": [,\n}", Format::Native).unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn native_rejects_unknown_fields() {
        let err = parse_instance(r#"{"tasks": [], "resources": [], "colour": 1}"#, Format::Native).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn empty_task_list_yields_two_dummies() {
        let inst = parse_instance(r#"{"tasks": [], "resources": []}"#, Format::Native).unwrap();
        assert_eq!(inst.task_count(), 2);
        assert_eq!(inst.real_task_count(), 0);
    }

    #[test]
    fn cycle_is_a_semantic_error() {
        let text = r#"{"tasks": [
            {"id": 1, "duration": 1, "successors": [2]},
            {"id": 2, "duration": 1, "successors": [1]}
        ], "resources": []}"#;
        assert!(matches!(
            parse_instance(text, Format::Native),
            Err(ParseError::Semantic(_))
        ));
    }

    #[test]
    fn serializer_is_canonical() {
        let text = r#"{"resources": [{"capacity": 2, "id": 1}],
            "tasks": [{"successors": [], "id": 2, "duration": 1},
                      {"id": 1, "duration": 2, "requirements": {"1": 1}, "successors": [2]}]}"#;
        let inst = parse_instance(text, Format::Native).unwrap();
        let out = serialize_instance(&inst);
        assert!(out.find("\"id\": 1").unwrap() < out.find("\"id\": 2").unwrap());
        assert!(out.contains("\"horizon\": 3"));
        assert_eq!(parse_instance(&out, Format::Native).unwrap(), inst);
        assert_eq!(serialize_instance(&parse_instance(&out, Format::Native).unwrap()), out);
    }

    #[test]
    fn psplib_rejects_multi_mode() {
        let text = "jobs (incl. supersource/sink ):  2\nhorizon : 1\n  - renewable : 0 R\n  - nonrenewable : 0 N\nPRECEDENCE RELATIONS:\njobnr. #modes #successors successors\n 1 2 1 2\n";
        let err = parse_instance(text, Format::PsplibSm).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 7, .. }), "{err:?}");
    }
}
