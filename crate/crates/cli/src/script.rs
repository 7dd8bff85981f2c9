//! Plain-text session scripts.
//!
//! One step per line; blank lines and `#` comments are ignored:
//!
//! ```text
//! task <text>
//! op <OpKind> [<node>] [:: <question>]
//! user <Idea|Mitigation> <parent> :: <name> [:: <description>]
//! pin <node>
//! unpin <node>
//! show [at <seq>]
//! collection
//! ```
//!
//! Nodes are named by id or by name; names are compared after normalization
//! and must match exactly one node. `op` may omit the node only for
//! `InitializeSpace`, which always works on the task.

use std::io::{self, Write};
use std::str::FromStr;

use flexmind_core::engine::{self, EngineError, ErrorCode, OpOutcome};
use flexmind_core::orchestrator::Provider;
use flexmind_core::store::{task_problem, EventStore, SessionLog, SessionSnapshot};
use flexmind_core::{NodeId, NodeKind, OpKind, OrchestratorConfig};
use thiserror::Error;

use crate::report;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Task(String),
    Op {
        op: OpKind,
        node: Option<String>,
        question: Option<String>,
    },
    User {
        kind: NodeKind,
        parent: String,
        name: String,
        description: String,
    },
    Pin(String),
    Unpin(String),
    Show {
        at: Option<u64>,
    },
    Collection,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptLine {
    /// 1-based line number in the source.
    pub line: usize,
    pub step: Step,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScriptParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step} (line {line}) failed: {error}")]
pub struct StepFailure {
    /// 1-based index among the script's steps.
    pub step: usize,
    pub line: usize,
    pub error: EngineError,
}

const SEPARATOR: &str = "::";

fn split_fields(rest: &str) -> Vec<&str> {
    rest.split(SEPARATOR).map(str::trim).collect()
}

fn parse_line(text: &str) -> Result<Step, String> {
    let (keyword, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let rest = rest.trim();
    let required = |what: &str| {
        if rest.is_empty() {
            Err(format!("`{keyword}` needs {what}"))
        } else {
            Ok(rest.to_string())
        }
    };
    match keyword {
        "task" => required("the task statement").map(Step::Task),
        "op" => {
            let (kind, target) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            if kind.is_empty() {
                return Err("`op` needs an operation kind".into());
            }
            let op = OpKind::from_str(kind)?;
            let fields = split_fields(target);
            if fields.len() > 2 {
                return Err(format!("`op` takes at most one `{SEPARATOR}` before the question"));
            }
            let node = Some(fields[0]).filter(|n| !n.is_empty()).map(str::to_string);
            let question = fields.get(1).map(|q| q.to_string());
            if node.is_none() && op != OpKind::InitializeSpace {
                return Err(format!("`op {op}` needs a node"));
            }
            match (op.takes_question(), &question) {
                (true, None) => Err(format!("`op {op}` needs `{SEPARATOR} <question>`")),
                (true, Some(q)) if q.is_empty() => Err("the question is empty".into()),
                (false, Some(_)) => Err(format!("`op {op}` does not take a question")),
                _ => Ok(Step::Op { op, node, question }),
            }
        }
        "user" => {
            let (kind, rest) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            let kind = NodeKind::from_str(kind)?;
            if !matches!(kind, NodeKind::Idea | NodeKind::Mitigation) {
                return Err(format!("users add Idea or Mitigation nodes, not {kind}"));
            }
            match split_fields(rest)[..] {
                [parent, name] | [parent, name, _] if parent.is_empty() || name.is_empty() => {
                    Err("`user` needs a parent and a name".into())
                }
                [parent, name] => Ok(Step::User {
                    kind,
                    parent: parent.into(),
                    name: name.into(),
                    description: String::new(),
                }),
                [parent, name, description] => Ok(Step::User {
                    kind,
                    parent: parent.into(),
                    name: name.into(),
                    description: description.into(),
                }),
                _ => Err(format!(
                    "expected `user <Kind> <parent> {SEPARATOR} <name> [{SEPARATOR} <description>]`"
                )),
            }
        }
        "pin" => required("a node").map(Step::Pin),
        "unpin" => required("a node").map(Step::Unpin),
        "show" => match rest.split_whitespace().collect::<Vec<_>>()[..] {
            [] => Ok(Step::Show { at: None }),
            ["at", seq] => seq
                .parse()
                .map(|at| Step::Show { at: Some(at) })
                .map_err(|_| format!("`show at` needs an event number, not {seq:?}")),
            _ => Err("expected `show` or `show at <seq>`".into()),
        },
        "collection" if rest.is_empty() => Ok(Step::Collection),
        "collection" => Err("`collection` takes no arguments".into()),
        other => Err(format!("unknown step {other:?}")),
    }
}

/// Parses a whole script. It must hold at least one step, and exactly one
/// `task`, which comes first.
pub fn parse_script(text: &str) -> Result<Vec<ScriptLine>, ScriptParseError> {
    let mut steps = Vec::new();
    let mut last_line = 0;
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let step = parse_line(trimmed).map_err(|message| ScriptParseError { line, message })?;
        let is_task = matches!(step, Step::Task(_));
        if is_task != steps.is_empty() {
            let message = if is_task {
                "a script has only one `task`"
            } else {
                "the first step must be `task`"
            };
            return Err(ScriptParseError {
                line,
                message: message.into(),
            });
        }
        steps.push(ScriptLine { line, step });
    }
    if steps.is_empty() {
        return Err(ScriptParseError {
            line: last_line.max(1),
            message: "script has no steps".into(),
        });
    }
    Ok(steps)
}

/// Resolves an id or a name to exactly one node of `snapshot`.
pub fn resolve(snapshot: &SessionSnapshot, reference: &str) -> Result<NodeId, EngineError> {
    if let Ok(id) = NodeId::from_str(reference) {
        if snapshot.graph.contains_node(id) {
            return Ok(id);
        }
    }
    match snapshot.graph.find_by_name(reference)[..] {
        [node] => Ok(node.id),
        [] => {
            Err(EngineError::new(ErrorCode::UnknownNode, format!("no node named {reference:?}")).with_detail(reference))
        }
        ref many => Err(EngineError::new(
            ErrorCode::Validation,
            format!("{reference:?} names {} nodes; use an id", many.len()),
        )
        .with_detail(reference)),
    }
}

/// Everything a script run needs besides the script.
pub struct Runner<'a> {
    pub provider: &'a dyn Provider,
    pub config: OrchestratorConfig,
    /// Persist the session here; in memory when `None`.
    pub store: Option<EventStore>,
}

impl Runner<'_> {
    /// Runs `steps` in order, writing a transcript to `out`. Stops at the first failure.
    pub fn run(&self, steps: &[ScriptLine], out: &mut dyn Write) -> Result<SessionLog, RunError> {
        let mut log: Option<SessionLog> = None;
        for (index, ScriptLine { line, step }) in steps.iter().enumerate() {
            let number = index + 1;
            write!(out, "[{number}] ")?;
            let result = match (step, log.as_mut()) {
                (Step::Task(task), _) => self.start(task).map_err(Failure::Engine).and_then(|created| {
                    writeln!(out, "task {task:?} -> session {}", created.id())?;
                    log = Some(created);
                    Ok(())
                }),
                (_, None) => unreachable!("parse_script puts `task` first"),
                (step, Some(log)) => self.step(step, log, out),
            };
            match result {
                Ok(()) => {}
                Err(Failure::Io(err)) => return Err(RunError::Output(err)),
                Err(Failure::Engine(error)) => {
                    writeln!(out, "failed")?;
                    return Err(RunError::Step(StepFailure {
                        step: number,
                        line: *line,
                        error,
                    }));
                }
            }
        }
        Ok(log.expect("parse_script guarantees a task step"))
    }

    fn start(&self, task: &str) -> Result<SessionLog, EngineError> {
        if let Some(problem) = task_problem(task) {
            return Err(EngineError::new(ErrorCode::Validation, problem).with_detail("task"));
        }
        Ok(match &self.store {
            Some(store) => store.create_session(task)?,
            None => SessionLog::in_memory(task)?,
        })
    }

    fn step(&self, step: &Step, log: &mut SessionLog, out: &mut dyn Write) -> Result<(), Failure> {
        match step {
            Step::Task(_) => unreachable!("handled by run"),
            Step::Op { op, node, question } => {
                let focus = match node {
                    Some(node) => resolve(log.snapshot(), node)?,
                    None => log.snapshot().graph.root_id(),
                };
                let focus_name = log
                    .snapshot()
                    .graph
                    .node(focus)
                    .map(|n| n.name.clone())
                    .unwrap_or_default();
                let outcome = engine::run_op(log, self.provider, &self.config, *op, focus, question.as_deref(), None)?;
                writeln!(out, "op {op} {focus_name:?} -> {}", summarize(&outcome))?;
                report::write_delta(out, &outcome)?;
            }
            Step::User {
                kind,
                parent,
                name,
                description,
            } => {
                let parent = resolve(log.snapshot(), parent)?;
                let node = engine::add_user_node(log, parent, *kind, name, description)?;
                writeln!(out, "user {kind} {:?} ({})", node.name, node.id)?;
            }
            Step::Pin(reference) | Step::Unpin(reference) => {
                let node = resolve(log.snapshot(), reference)?;
                let pinning = matches!(step, Step::Pin(_));
                let pins = if pinning {
                    engine::pin(log, node)
                } else {
                    engine::unpin(log, node)
                }?;
                let name = &log.snapshot().graph.node(node).expect("resolved").name;
                writeln!(
                    out,
                    "{} {name:?} -> {} pinned",
                    if pinning { "pin" } else { "unpin" },
                    pins.len()
                )?;
            }
            Step::Show { at } => {
                let snapshot = match at {
                    Some(at) => log.snapshot_at(*at).map_err(EngineError::from)?,
                    None => log.snapshot().clone(),
                };
                writeln!(out, "show (after event {})", snapshot.last_seq)?;
                report::write_summary(out, &snapshot)?;
            }
            Step::Collection => {
                let entries = engine::collection(log.snapshot());
                writeln!(out, "collection: {} item(s)", entries.len())?;
                for entry in entries {
                    writeln!(out, "      {}", entry.path.join(" > "))?;
                }
            }
        }
        Ok(())
    }
}

fn summarize(outcome: &OpOutcome) -> String {
    format!(
        "+{} node(s), +{} edge(s), {} attempt(s)",
        outcome.added_nodes.len(),
        outcome.added_edges.len(),
        outcome.attempts
    )
}

enum Failure {
    Engine(EngineError),
    Io(io::Error),
}

impl From<EngineError> for Failure {
    fn from(err: EngineError) -> Self {
        Failure::Engine(err)
    }
}

impl From<io::Error> for Failure {
    fn from(err: io::Error) -> Self {
        Failure::Io(err)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Step(StepFailure),
    #[error("writing the transcript: {0}")]
    Output(#[from] io::Error),
}
