//! Event-sourced session persistence.
//!
//! Each session is one append-only file, `<session-id>.events.jsonl`, with one
//! JSON object per line: `{"seq", "at", "kind", "payload"}`. A snapshot is the
//! fold of the log from seq 0, so any prefix of the log is a valid historical
//! view. Lines are written whole and synced before an append returns; a torn
//! final line makes the log unreadable rather than silently shorter.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{
    node_name_problem, DesignGraph, Edge, EdgeKind, EventSeq, IdeationNode, NodeBatch, NodeId, NodeKind, PinSet,
    Provenance, SessionId,
};
use crate::orchestrator::{ModelExchange, OpKind};

/// Written into every `SessionCreated` payload.
pub const LOG_FORMAT_VERSION: u32 = 1;

/// Environment variable naming the store root.
pub const DATA_DIR_ENV: &str = "FLEXMIND_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionCreated {
    pub task: String,
    pub root: NodeId,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationCompleted {
    pub op: OpKind,
    pub focus: NodeId,
    pub nodes: Vec<IdeationNode>,
    pub edges: Vec<Edge>,
    /// 16 lowercase hex digits, see [`ModelExchange::digest`].
    pub exchange_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationFailed {
    pub op: OpKind,
    pub focus: NodeId,
    pub error_class: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserNodeAdded {
    pub node: IdeationNode,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinChange {
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventPayload {
    SessionCreated(SessionCreated),
    GenerationCompleted(GenerationCompleted),
    GenerationFailed(GenerationFailed),
    UserNodeAdded(UserNodeAdded),
    NodePinned(PinChange),
    NodeUnpinned(PinChange),
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::SessionCreated(_) => "SessionCreated",
            EventPayload::GenerationCompleted(_) => "GenerationCompleted",
            EventPayload::GenerationFailed(_) => "GenerationFailed",
            EventPayload::UserNodeAdded(_) => "UserNodeAdded",
            EventPayload::NodePinned(_) => "NodePinned",
            EventPayload::NodeUnpinned(_) => "NodeUnpinned",
        }
    }

    /// A `SessionCreated` payload with a fresh root id.
    pub fn session_created(task: &str) -> Self {
        EventPayload::SessionCreated(SessionCreated {
            task: task.to_string(),
            root: NodeId::random(),
            version: LOG_FORMAT_VERSION,
        })
    }

    pub fn generation_completed(op: OpKind, focus: NodeId, batch: NodeBatch, exchange: &ModelExchange) -> Self {
        EventPayload::GenerationCompleted(GenerationCompleted {
            op,
            focus,
            nodes: batch.nodes,
            edges: batch.edges,
            exchange_digest: format!("{:016x}", exchange.digest()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionEvent {
    pub seq: EventSeq,
    pub at: DateTime<Utc>,
    pub payload: EventPayload,
}

#[derive(Serialize)]
struct LineOut<'a> {
    seq: EventSeq,
    at: &'a DateTime<Utc>,
    #[serde(flatten)]
    payload: &'a EventPayload,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LineIn {
    seq: EventSeq,
    at: DateTime<Utc>,
    kind: String,
    payload: Value,
}

impl SessionEvent {
    /// The event's log line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(&LineOut {
            seq: self.seq,
            at: &self.at,
            payload: &self.payload,
        })
        .expect("events always serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        let raw: LineIn = serde_json::from_str(line)?;
        let payload = serde_json::from_value(json!({ "kind": raw.kind, "payload": raw.payload }))?;
        Ok(Self {
            seq: raw.seq,
            at: raw.at,
            payload,
        })
    }

    /// The event as a JSON value with the same shape as its log line.
    pub fn to_json(&self) -> Value {
        serde_json::from_str(&self.to_line()).expect("a line is valid JSON")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailureSummary {
    pub seq: EventSeq,
    pub op: OpKind,
    pub focus: NodeId,
    pub error_class: String,
    pub attempts: u32,
}

/// State of a session after folding its log up to `last_seq`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionSnapshot {
    pub graph: DesignGraph,
    pub pins: PinSet,
    pub last_seq: EventSeq,
    pub failures: Vec<FailureSummary>,
}

/// The snapshot's JSON shape: `{nodes, edges, pins, last_seq}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotWire {
    pub nodes: Vec<IdeationNode>,
    pub edges: Vec<Edge>,
    pub pins: Vec<NodeId>,
    pub last_seq: EventSeq,
}

impl SessionSnapshot {
    pub fn to_wire(&self) -> SnapshotWire {
        SnapshotWire {
            nodes: self.graph.nodes().cloned().collect(),
            edges: self.graph.edges().copied().collect(),
            pins: self.pins.iter().collect(),
            last_seq: self.last_seq,
        }
    }

    /// Checks that `payload` may be appended as event `seq`.
    pub fn validate(&self, seq: EventSeq, payload: &EventPayload) -> Result<(), String> {
        self.clone().apply(seq, Utc::now(), payload).map(|_| ())
    }

    /// Applies one event after seq 0.
    fn apply(mut self, seq: EventSeq, _at: DateTime<Utc>, payload: &EventPayload) -> Result<Self, String> {
        let expected = self.last_seq + 1;
        if seq != expected {
            return Err(format!("expected seq {expected}, found {seq}"));
        }
        match payload {
            EventPayload::SessionCreated(_) => return Err("SessionCreated may only appear at seq 0".into()),
            EventPayload::GenerationCompleted(e) => {
                require_node(&self.graph, e.focus)?;
                for node in &e.nodes {
                    check_stamp(node, seq)?;
                    let user_allowed = e.op == OpKind::AnswerQuestion && node.kind == NodeKind::Question;
                    if node.provenance == Provenance::User && !user_allowed {
                        return Err(format!("generated node {} has User provenance", node.id));
                    }
                }
                let batch = NodeBatch {
                    nodes: e.nodes.clone(),
                    edges: e.edges.clone(),
                };
                self.graph = self.graph.add_nodes(&batch).map_err(|err| err.to_string())?;
            }
            EventPayload::GenerationFailed(e) => {
                require_node(&self.graph, e.focus)?;
                self.failures.push(FailureSummary {
                    seq,
                    op: e.op,
                    focus: e.focus,
                    error_class: e.error_class.clone(),
                    attempts: e.attempts,
                });
            }
            EventPayload::UserNodeAdded(e) => {
                check_stamp(&e.node, seq)?;
                check_user_node(&self.graph, &e.node, &e.edges)?;
                let batch = NodeBatch {
                    nodes: vec![e.node.clone()],
                    edges: e.edges.clone(),
                };
                self.graph = self.graph.add_nodes(&batch).map_err(|err| err.to_string())?;
            }
            EventPayload::NodePinned(e) => {
                self.pins.pin(&self.graph, e.node).map_err(|err| err.to_string())?;
            }
            EventPayload::NodeUnpinned(e) => {
                self.pins.unpin(e.node).map_err(|err| err.to_string())?;
            }
        }
        self.last_seq = seq;
        Ok(self)
    }

    fn genesis(seq: EventSeq, at: DateTime<Utc>, payload: &EventPayload) -> Result<Self, String> {
        if seq != 0 {
            return Err(format!("log must start at seq 0, found {seq}"));
        }
        let EventPayload::SessionCreated(created) = payload else {
            return Err(format!("seq 0 must be SessionCreated, found {}", payload.kind()));
        };
        if created.version != LOG_FORMAT_VERSION {
            return Err(format!("unsupported log version {}", created.version));
        }
        let root = IdeationNode {
            id: created.root,
            kind: NodeKind::Task,
            name: created.task.clone(),
            description: String::new(),
            provenance: Provenance::User,
            created_at: at,
            created_by_event: 0,
        };
        let graph = DesignGraph::new(root).map_err(|e| e.to_string())?;
        Ok(Self {
            graph,
            pins: PinSet::new(),
            last_seq: 0,
            failures: Vec::new(),
        })
    }
}

fn require_node(graph: &DesignGraph, id: NodeId) -> Result<(), String> {
    if graph.contains_node(id) {
        Ok(())
    } else {
        Err(format!("unknown node {id}"))
    }
}

fn check_stamp(node: &IdeationNode, seq: EventSeq) -> Result<(), String> {
    if node.created_by_event != seq {
        return Err(format!(
            "node {} claims event {} but arrived in event {seq}",
            node.id, node.created_by_event
        ));
    }
    Ok(())
}

/// User contributions are single Ideas under a Category or Mitigations under a Risk.
fn check_user_node(graph: &DesignGraph, node: &IdeationNode, edges: &[Edge]) -> Result<(), String> {
    if node.provenance != Provenance::User {
        return Err(format!("user node {} must have User provenance", node.id));
    }
    let (parent_kind, edge_kind) = match node.kind {
        NodeKind::Idea => (NodeKind::Category, EdgeKind::Contains),
        NodeKind::Mitigation => (NodeKind::Risk, EdgeKind::Mitigates),
        other => return Err(format!("users cannot add {other} nodes")),
    };
    let [edge] = edges else {
        return Err("a user node has exactly one parent edge".into());
    };
    let parent = graph
        .node(edge.source)
        .ok_or_else(|| format!("unknown node {}", edge.source))?;
    if edge.target != node.id || edge.kind != edge_kind || parent.kind != parent_kind {
        return Err(format!("a user {} must hang off a {parent_kind}", node.kind));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("corrupt log at seq {seq}: {reason}")]
pub struct CorruptLogError {
    /// Position of the first event that could not be applied.
    pub seq: EventSeq,
    pub reason: String,
}

/// Folds a log into a snapshot.
pub fn replay(events: &[SessionEvent]) -> Result<SessionSnapshot, CorruptLogError> {
    let (first, rest) = events.split_first().ok_or_else(|| CorruptLogError {
        seq: 0,
        reason: "log is empty; SessionCreated is missing".into(),
    })?;
    let mut snapshot = SessionSnapshot::genesis(first.seq, first.at, &first.payload)
        .map_err(|reason| CorruptLogError { seq: 0, reason })?;
    for (i, event) in rest.iter().enumerate() {
        let position = i as EventSeq + 1;
        snapshot = snapshot
            .apply(event.seq, event.at, &event.payload)
            .map_err(|reason| CorruptLogError { seq: position, reason })?;
    }
    Ok(snapshot)
}

/// Parses log text. Every record must be a complete, newline-terminated line.
pub fn parse_log(text: &str) -> Result<Vec<SessionEvent>, CorruptLogError> {
    let mut events = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let seq = events.len() as EventSeq;
        let Some(end) = rest.find('\n') else {
            return Err(CorruptLogError {
                seq,
                reason: "record is not newline-terminated (torn write?)".into(),
            });
        };
        let line = &rest[..end];
        let event = SessionEvent::from_line(line).map_err(|e| CorruptLogError {
            seq,
            reason: format!("undecodable record: {e}"),
        })?;
        events.push(event);
        rest = &rest[end + 1..];
    }
    Ok(events)
}

/// Parses and folds log text.
pub fn replay_text(text: &str) -> Result<(Vec<SessionEvent>, SessionSnapshot), CorruptLogError> {
    let events = parse_log(text)?;
    let snapshot = replay(&events)?;
    Ok((events, snapshot))
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("invalid event: {0}")]
    Validation(String),
    #[error("storage failure: {0}")]
    Storage(#[from] io::Error),
    #[error("session {0} not found")]
    NotFound(SessionId),
    #[error(transparent)]
    Corrupt(#[from] CorruptLogError),
    #[error("seq {seq} is out of range (last is {last})")]
    OutOfRange { seq: EventSeq, last: EventSeq },
}

/// One session's log plus its folded state, open for appending.
#[derive(Debug)]
pub struct SessionLog {
    id: SessionId,
    file: Option<File>,
    exchanges: Option<PathBuf>,
    events: Vec<SessionEvent>,
    snapshot: SessionSnapshot,
}

impl SessionLog {
    /// A session that lives only in memory.
    pub fn in_memory(task: &str) -> Result<Self, StoreError> {
        let payload = EventPayload::session_created(task);
        Self::start(SessionId::random(), None, payload, Utc::now())
    }

    fn start(id: SessionId, file: Option<File>, payload: EventPayload, at: DateTime<Utc>) -> Result<Self, StoreError> {
        let snapshot = SessionSnapshot::genesis(0, at, &payload).map_err(StoreError::Validation)?;
        let mut log = Self {
            id,
            file,
            exchanges: None,
            events: Vec::new(),
            snapshot,
        };
        let event = SessionEvent { seq: 0, at, payload };
        log.write(&event)?;
        log.events.push(event);
        Ok(log)
    }

    pub fn id(&self) -> SessionId {
        self.id
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn snapshot(&self) -> &SessionSnapshot {
        &self.snapshot
    }

    pub fn next_seq(&self) -> EventSeq {
        self.snapshot.last_seq + 1
    }

    pub fn is_persistent(&self) -> bool {
        self.file.is_some()
    }

    /// Validates, writes and folds one event, stamped now.
    pub fn append(&mut self, payload: EventPayload) -> Result<&SessionEvent, StoreError> {
        self.append_at(payload, Utc::now())
    }

    pub fn append_at(&mut self, payload: EventPayload, at: DateTime<Utc>) -> Result<&SessionEvent, StoreError> {
        let seq = self.next_seq();
        let next = self
            .snapshot
            .clone()
            .apply(seq, at, &payload)
            .map_err(StoreError::Validation)?;
        let event = SessionEvent { seq, at, payload };
        self.write(&event)?;
        self.snapshot = next;
        self.events.push(event);
        Ok(self.events.last().expect("just pushed"))
    }

    fn write(&mut self, event: &SessionEvent) -> Result<(), StoreError> {
        if let Some(file) = &mut self.file {
            let mut line = event.to_line();
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        Ok(())
    }

    /// Historical view after event `seq`.
    pub fn snapshot_at(&self, seq: EventSeq) -> Result<SessionSnapshot, StoreError> {
        if seq > self.snapshot.last_seq {
            return Err(StoreError::OutOfRange {
                seq,
                last: self.snapshot.last_seq,
            });
        }
        Ok(replay(&self.events[..=seq as usize])?)
    }

    /// Appends the exchange to the debug sidecar, when enabled.
    pub fn record_exchange(&self, exchange: &ModelExchange) -> Result<(), StoreError> {
        let Some(path) = &self.exchanges else { return Ok(()) };
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut line = serde_json::to_string(exchange).expect("exchanges always serialize");
        line.push('\n');
        file.write_all(line.as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionSummary {
    pub session_id: SessionId,
    pub task: String,
    pub last_activity: DateTime<Utc>,
}

/// Directory of session logs.
#[derive(Debug, Clone)]
pub struct EventStore {
    dir: PathBuf,
    debug_exchanges: bool,
}

impl EventStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            debug_exchanges: false,
        })
    }

    /// Also write `<session-id>.exchanges.jsonl` with full provider exchanges.
    pub fn with_debug_exchanges(mut self, enabled: bool) -> Self {
        self.debug_exchanges = enabled;
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn log_path(&self, id: SessionId) -> PathBuf {
        self.dir.join(format!("{id}.events.jsonl"))
    }

    pub fn exchanges_path(&self, id: SessionId) -> PathBuf {
        self.dir.join(format!("{id}.exchanges.jsonl"))
    }

    pub fn create_session(&self, task: &str) -> Result<SessionLog, StoreError> {
        self.create_session_at(task, Utc::now())
    }

    pub fn create_session_at(&self, task: &str, at: DateTime<Utc>) -> Result<SessionLog, StoreError> {
        let id = SessionId::random();
        let payload = EventPayload::session_created(task);
        SessionSnapshot::genesis(0, at, &payload).map_err(StoreError::Validation)?;
        let file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(self.log_path(id))?;
        let mut log = SessionLog::start(id, Some(file), payload, at)?;
        log.exchanges = self.debug_exchanges.then(|| self.exchanges_path(id));
        Ok(log)
    }

    /// Loads a session for further appends.
    pub fn open_session(&self, id: SessionId) -> Result<SessionLog, StoreError> {
        let events = self.read_events(id)?;
        let snapshot = replay(&events)?;
        let file = OpenOptions::new().append(true).open(self.log_path(id))?;
        Ok(SessionLog {
            id,
            file: Some(file),
            exchanges: self.debug_exchanges.then(|| self.exchanges_path(id)),
            events,
            snapshot,
        })
    }

    /// Appends one event to a stored session.
    pub fn append(&self, id: SessionId, payload: EventPayload) -> Result<SessionEvent, StoreError> {
        let mut log = self.open_session(id)?;
        log.append(payload).cloned()
    }

    pub fn read_events(&self, id: SessionId) -> Result<Vec<SessionEvent>, StoreError> {
        let text = match fs::read_to_string(self.log_path(id)) {
            Ok(text) => text,
            Err(err) if err.kind() == ErrorKind::NotFound => return Err(StoreError::NotFound(id)),
            Err(err) => return Err(err.into()),
        };
        Ok(parse_log(&text)?)
    }

    pub fn load(&self, id: SessionId) -> Result<SessionSnapshot, StoreError> {
        Ok(replay(&self.read_events(id)?)?)
    }

    pub fn snapshot_at(&self, id: SessionId, seq: EventSeq) -> Result<SessionSnapshot, StoreError> {
        let events = self.read_events(id)?;
        let last = events.len() as EventSeq - 1;
        if seq > last {
            return Err(StoreError::OutOfRange { seq, last });
        }
        Ok(replay(&events[..=seq as usize])?)
    }

    /// Sessions in the store, most recently active first. Reads only the first
    /// line of each log.
    pub fn list_sessions(&self) -> Result<Vec<SessionSummary>, StoreError> {
        let mut sessions = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let file_name = entry.file_name();
            let Some(stem) = file_name.to_str().and_then(|n| n.strip_suffix(".events.jsonl")) else {
                continue;
            };
            let Ok(session_id) = stem.parse::<SessionId>() else {
                continue;
            };
            let mut first = String::new();
            BufReader::new(File::open(entry.path())?).read_line(&mut first)?;
            let event = SessionEvent::from_line(first.trim_end_matches('\n')).map_err(|e| CorruptLogError {
                seq: 0,
                reason: format!("undecodable record: {e}"),
            })?;
            let EventPayload::SessionCreated(created) = event.payload else {
                return Err(CorruptLogError {
                    seq: 0,
                    reason: "seq 0 is not SessionCreated".into(),
                }
                .into());
            };
            let last_activity = entry.metadata()?.modified().map(DateTime::<Utc>::from)?;
            sessions.push(SessionSummary {
                session_id,
                task: created.task,
                last_activity,
            });
        }
        sessions.sort_by(|a, b| {
            b.last_activity
                .cmp(&a.last_activity)
                .then(a.session_id.cmp(&b.session_id))
        });
        Ok(sessions)
    }
}

/// Checks a task statement for session creation.
pub fn task_problem(task: &str) -> Option<&'static str> {
    node_name_problem(NodeKind::Task, task)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TASK: &str = "cleaning laundry with less water";

    #[test]
    fn first_append_is_seq_zero() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        let log = store.create_session(TASK).unwrap();
        assert_eq!(log.events()[0].seq, 0);
        assert_eq!(log.snapshot().graph.task_statement(), TASK);
        assert_eq!(store.load(log.id()).unwrap(), *log.snapshot());
    }

    #[test]
    fn pinning_unknown_node_is_rejected() {
        let mut log = SessionLog::in_memory(TASK).unwrap();
        let err = log
            .append(EventPayload::NodePinned(PinChange {
                node: NodeId::from_u128(5),
            }))
            .unwrap_err();
        assert!(matches!(err, StoreError::Validation(_)));
        assert_eq!(log.events().len(), 1);
    }

    #[test]
    fn empty_log_is_corrupt() {
        assert_eq!(replay(&[]).unwrap_err().seq, 0);
        assert!(parse_log("").unwrap().is_empty());
    }

    #[test]
    fn line_shape_is_exact() {
        let log = SessionLog::in_memory(TASK).unwrap();
        let line = log.events()[0].to_line();
        let value: Value = serde_json::from_str(&line).unwrap();
        let mut keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["at", "kind", "payload", "seq"]);
        assert!(line.starts_with("{\"seq\":0,\"at\":\""));
        let kind_at = line.find("\"kind\":").unwrap();
        assert!(line.find("\"at\":").unwrap() < kind_at && kind_at < line.find("\"payload\":").unwrap());
        assert_eq!(SessionEvent::from_line(&line).unwrap(), log.events()[0]);

        let mut extra = value.clone();
        extra["extra"] = json!(1);
        assert!(SessionEvent::from_line(&extra.to_string()).is_err());
        let mut extra = value;
        extra["payload"]["extra"] = json!(1);
        assert!(SessionEvent::from_line(&extra.to_string()).is_err());
    }

    #[test]
    fn torn_tail_is_corrupt() {
        let log = SessionLog::in_memory(TASK).unwrap();
        let line = log.events()[0].to_line();
        let err = parse_log(&line).unwrap_err();
        assert_eq!(err.seq, 0);
        let full = format!("{line}\n");
        assert_eq!(parse_log(&full).unwrap().len(), 1);
    }

    #[test]
    fn list_reads_tasks() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        assert!(store.list_sessions().unwrap().is_empty());
        store.create_session(TASK).unwrap();
        store
            .create_session("minimizing accidents from people walking and texting on a cell phone")
            .unwrap();
        let mut tasks: Vec<String> = store.list_sessions().unwrap().into_iter().map(|s| s.task).collect();
        tasks.sort();
        assert_eq!(
            tasks,
            [
                TASK,
                "minimizing accidents from people walking and texting on a cell phone"
            ]
        );
    }

    #[test]
    fn missing_session() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        assert!(matches!(
            store.load(SessionId::from_u128(9)),
            Err(StoreError::NotFound(_))
        ));
    }

    #[test]
    fn task_length_rules() {
        assert!(task_problem("").is_some());
        assert!(task_problem(&"x".repeat(500)).is_none());
        assert!(task_problem(&"x".repeat(501)).is_some());
        assert!(SessionLog::in_memory("  ").is_err());
    }
}
