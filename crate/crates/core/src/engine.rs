//! Session-level actions shared by the CLI, the HTTP service and the Python
//! bindings. Each action validates its input, runs at most one orchestrator
//! call, and appends the resulting event(s) to a [`SessionLog`].

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{
    explored_summary, name_problem, normalize_name, Edge, EdgeKind, EventSeq, IdeationNode, NodeId, NodeKind, PinError,
    Provenance, SummaryEntry,
};
use crate::orchestrator::{
    execute, CancelToken, ExecuteError, ExecuteRequest, ModelExchange, NodeStamp, OpKind, OrchestratorConfig, Provider,
    ReplyPayload,
};
use crate::store::{EventPayload, GenerationFailed, PinChange, SessionLog, SessionSnapshot, StoreError, UserNodeAdded};

/// Machine-readable error classes. The string forms are a stable API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownNode,
    BadPrecondition,
    GenerationFailed,
    ProviderUnavailable,
    Validation,
    NotFound,
    Conflict,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 7] = [
        ErrorCode::UnknownNode,
        ErrorCode::BadPrecondition,
        ErrorCode::GenerationFailed,
        ErrorCode::ProviderUnavailable,
        ErrorCode::Validation,
        ErrorCode::NotFound,
        ErrorCode::Conflict,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnknownNode => "unknown_node",
            ErrorCode::BadPrecondition => "bad_precondition",
            ErrorCode::GenerationFailed => "generation_failed",
            ErrorCode::ProviderUnavailable => "provider_unavailable",
            ErrorCode::Validation => "validation",
            ErrorCode::NotFound => "not_found",
            ErrorCode::Conflict => "conflict",
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::UnknownNode | ErrorCode::NotFound => 404,
            ErrorCode::BadPrecondition => 422,
            ErrorCode::GenerationFailed => 502,
            ErrorCode::ProviderUnavailable => 503,
            ErrorCode::Validation => 400,
            ErrorCode::Conflict => 409,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{code}: {message}")]
pub struct EngineError {
    pub code: ErrorCode,
    pub message: String,
    /// Field path or node id the error is about.
    pub detail: Option<String>,
}

impl EngineError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    pub fn unknown_node(id: NodeId) -> Self {
        Self::new(ErrorCode::UnknownNode, format!("unknown node {id}")).with_detail(id.to_string())
    }
}

impl From<StoreError> for EngineError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::Validation(msg) => EngineError::new(ErrorCode::Validation, msg),
            StoreError::NotFound(id) => {
                EngineError::new(ErrorCode::NotFound, format!("session {id} not found")).with_detail(id.to_string())
            }
            StoreError::OutOfRange { seq, last } => EngineError::new(
                ErrorCode::Validation,
                format!("seq {seq} is out of range (last is {last})"),
            )
            .with_detail("at"),
            // No dedicated code exists for the store itself; it is an
            // unavailable backend like the provider.
            other @ (StoreError::Storage(_) | StoreError::Corrupt(_)) => EngineError::new(
                ErrorCode::ProviderUnavailable,
                format!("session storage unavailable: {other}"),
            ),
        }
    }
}

/// Result of a successful generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpOutcome {
    pub seq: EventSeq,
    pub added_nodes: Vec<IdeationNode>,
    pub added_edges: Vec<Edge>,
    pub answer: Option<String>,
    pub attempts: u32,
    pub duration_ms: u64,
}

/// Runs a generation op and appends `GenerationCompleted` or `GenerationFailed`.
///
/// Precondition failures append nothing and never reach the provider.
pub fn run_op(
    log: &mut SessionLog,
    provider: &dyn Provider,
    config: &OrchestratorConfig,
    op: OpKind,
    focus: NodeId,
    question: Option<&str>,
    cancel: Option<&CancelToken>,
) -> Result<OpOutcome, EngineError> {
    let stamp = NodeStamp {
        event: log.next_seq(),
        at: chrono::Utc::now(),
    };
    let snapshot = log.snapshot();
    let result = execute(
        ExecuteRequest { op, focus, question },
        &snapshot.graph,
        &snapshot.pins,
        provider,
        config,
        stamp,
        cancel,
    );
    let (batch, exchange) = match result {
        Ok(done) => done,
        Err(ExecuteError::UnknownNode(id)) => return Err(EngineError::unknown_node(id)),
        Err(ExecuteError::Precondition(msg)) => {
            return Err(EngineError::new(ErrorCode::BadPrecondition, msg).with_detail(focus.to_string()))
        }
        Err(err) => {
            let exchange = err
                .exchange()
                .expect("provider and generation errors carry an exchange");
            let (code, class, path) = match &err {
                ExecuteError::Provider { .. } => (ErrorCode::ProviderUnavailable, "provider", None),
                ExecuteError::Generation { error, .. } => (
                    ErrorCode::GenerationFailed,
                    error.class(),
                    Some(error.path().to_string()),
                ),
                _ => unreachable!(),
            };
            log.record_exchange(exchange)?;
            log.append_at(
                EventPayload::GenerationFailed(GenerationFailed {
                    op,
                    focus,
                    error_class: class.to_string(),
                    attempts: exchange.attempts,
                }),
                stamp.at,
            )?;
            let mut error = EngineError::new(code, err.to_string());
            error.detail = path;
            return Err(error);
        }
    };

    log.record_exchange(&exchange)?;
    let answer = match &exchange.parsed {
        Some(ReplyPayload::Answer(reply)) => Some(reply.answer.clone()),
        _ => None,
    };
    let (added_nodes, added_edges) = (batch.nodes.clone(), batch.edges.clone());
    let payload = EventPayload::generation_completed(op, focus, batch, &exchange);
    let seq = match log.append_at(payload, stamp.at) {
        Ok(event) => event.seq,
        Err(StoreError::Validation(msg)) => return Err(reject_batch(log, op, focus, &exchange, stamp, msg)),
        Err(other) => return Err(other.into()),
    };
    Ok(OpOutcome {
        seq,
        added_nodes,
        added_edges,
        answer,
        attempts: exchange.attempts,
        duration_ms: exchange.duration_ms,
    })
}

/// A batch the graph refused is logged as a failed generation.
fn reject_batch(
    log: &mut SessionLog,
    op: OpKind,
    focus: NodeId,
    exchange: &ModelExchange,
    stamp: NodeStamp,
    reason: String,
) -> EngineError {
    let failed = EventPayload::GenerationFailed(GenerationFailed {
        op,
        focus,
        error_class: "batch".into(),
        attempts: exchange.attempts,
    });
    match log.append_at(failed, stamp.at) {
        Ok(_) => EngineError::new(
            ErrorCode::GenerationFailed,
            format!("generated nodes were rejected: {reason}"),
        ),
        Err(err) => err.into(),
    }
}

/// Adds a user-authored Idea (under a Category) or Mitigation (under a Risk).
pub fn add_user_node(
    log: &mut SessionLog,
    parent: NodeId,
    kind: NodeKind,
    name: &str,
    description: &str,
) -> Result<IdeationNode, EngineError> {
    let (parent_kind, edge_kind) = match kind {
        NodeKind::Idea => (NodeKind::Category, EdgeKind::Contains),
        NodeKind::Mitigation => (NodeKind::Risk, EdgeKind::Mitigates),
        other => {
            return Err(EngineError::new(
                ErrorCode::Validation,
                format!("users can add Idea or Mitigation nodes, not {other}"),
            )
            .with_detail("kind"))
        }
    };
    let graph = &log.snapshot().graph;
    let parent_node = graph.node(parent).ok_or_else(|| EngineError::unknown_node(parent))?;
    if parent_node.kind != parent_kind {
        return Err(EngineError::new(
            ErrorCode::BadPrecondition,
            format!(
                "a {kind} must be added under a {parent_kind}, not a {}",
                parent_node.kind
            ),
        )
        .with_detail(parent.to_string()));
    }
    let name = name.trim();
    if let Some(problem) = name_problem(name) {
        return Err(EngineError::new(ErrorCode::Validation, problem).with_detail("name"));
    }
    if kind == NodeKind::Idea {
        let normalized = normalize_name(name);
        if graph
            .children(parent, EdgeKind::Contains)
            .any(|n| n.normalized_name() == normalized)
        {
            return Err(EngineError::new(
                ErrorCode::Conflict,
                format!("{:?} already has an idea named {name:?}", parent_node.name),
            )
            .with_detail("name"));
        }
    }
    let node = IdeationNode::new(
        kind,
        name,
        description.trim(),
        Provenance::User,
        chrono::Utc::now(),
        log.next_seq(),
    );
    let edges = vec![Edge::new(parent, edge_kind, node.id)];
    let at = node.created_at;
    log.append_at(
        EventPayload::UserNodeAdded(UserNodeAdded {
            node: node.clone(),
            edges,
        }),
        at,
    )?;
    Ok(node)
}

/// Pins a node. Pinning an already pinned node changes nothing.
pub fn pin(log: &mut SessionLog, node: NodeId) -> Result<Vec<NodeId>, EngineError> {
    let snapshot = log.snapshot();
    match snapshot.pins.check_pin(&snapshot.graph, node) {
        Ok(()) => {
            log.append(EventPayload::NodePinned(PinChange { node }))?;
        }
        Err(PinError::AlreadyPinned(_)) => {}
        Err(PinError::UnknownNode(id)) => return Err(EngineError::unknown_node(id)),
        Err(err) => {
            return Err(EngineError::new(ErrorCode::BadPrecondition, err.to_string()).with_detail(node.to_string()))
        }
    }
    Ok(log.snapshot().pins.iter().collect())
}

pub fn unpin(log: &mut SessionLog, node: NodeId) -> Result<Vec<NodeId>, EngineError> {
    let snapshot = log.snapshot();
    if !snapshot.graph.contains_node(node) {
        return Err(EngineError::unknown_node(node));
    }
    if !snapshot.pins.contains(node) {
        return Err(
            EngineError::new(ErrorCode::NotFound, format!("node {node} is not pinned")).with_detail(node.to_string()),
        );
    }
    log.append(EventPayload::NodeUnpinned(PinChange { node }))?;
    Ok(log.snapshot().pins.iter().collect())
}

pub fn collection(snapshot: &SessionSnapshot) -> Vec<SummaryEntry> {
    explored_summary(&snapshot.graph, &snapshot.pins)
}
