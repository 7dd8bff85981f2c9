//! Python bindings: sessions, ops, pins, snapshots and reply parsing.
//!
//! Values cross the boundary as plain Python data (dicts, lists, strings) in
//! the same shapes the HTTP API uses; ids are 32-character hex strings.

use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use flexmind_core::engine;
use flexmind_core::orchestrator::{self, HttpProvider, HttpProviderConfig};
use flexmind_core::store::{replay_text, CorruptLogError, EventStore};
use flexmind_core::{
    EngineError, ErrorCode, EventSeq, MockProvider, NodeId, NodeKind, OpKind, OrchestratorConfig, Provider, SessionLog,
};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(
    flexmind,
    FlexMindError,
    PyException,
    "An engine error; carries `code` and `detail`."
);
create_exception!(
    flexmind,
    ReplyError,
    FlexMindError,
    "A model reply that could not be used; carries `error_class` and `path`."
);

fn engine_error(err: EngineError) -> PyErr {
    let py_err = FlexMindError::new_err(err.message.clone());
    Python::attach(|py| {
        let value = py_err.value(py);
        let _ = value.setattr("code", err.code.as_str());
        let _ = value.setattr("detail", err.detail.clone());
    });
    py_err
}

fn validation(message: impl Into<String>, detail: &str) -> PyErr {
    engine_error(EngineError::new(ErrorCode::Validation, message).with_detail(detail))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|err| FlexMindError::new_err(err.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn node_id(raw: &str, field: &str) -> PyResult<NodeId> {
    raw.parse()
        .map_err(|_| validation(format!("{field}: not a node id: {raw:?}"), field))
}

fn parse_kind<T: std::str::FromStr>(raw: &str, field: &str) -> PyResult<T> {
    raw.parse()
        .map_err(|_| validation(format!("{field}: unknown value {raw:?}"), field))
}

fn make_provider(
    provider: &str,
    fixtures: Option<PathBuf>,
    placeholders: bool,
    base_url: &str,
) -> PyResult<Arc<dyn Provider>> {
    match provider {
        "mock" => {
            let mock = match fixtures {
                Some(dir) => MockProvider::from_dir(dir).with_placeholders(placeholders),
                None => MockProvider::placeholders_only(),
            };
            Ok(Arc::new(mock))
        }
        // The key comes from FLEXMIND_API_KEY only.
        "http" => Ok(Arc::new(HttpProvider::new(HttpProviderConfig::from_env(
            base_url,
            Duration::from_secs(60),
        )))),
        other => Err(validation(
            format!("provider: expected \"mock\" or \"http\", got {other:?}"),
            "provider",
        )),
    }
}

/// One ideation session. Generation happens only in `run_op`.
#[pyclass(module = "flexmind")]
struct Session {
    log: Mutex<SessionLog>,
    provider: Arc<dyn Provider>,
    config: OrchestratorConfig,
}

impl Session {
    fn with_log<T>(&self, f: impl FnOnce(&mut SessionLog) -> PyResult<T>) -> PyResult<T> {
        let mut log = self
            .log
            .lock()
            .map_err(|_| FlexMindError::new_err("session poisoned by an earlier panic"))?;
        f(&mut log)
    }
}

#[pymethods]
impl Session {
    /// Starts a session. Without `data_dir` it lives in memory only. The mock
    /// provider makes up schema-valid replies unless `fixtures` is given.
    #[new]
    #[pyo3(signature = (task, *, data_dir=None, provider="mock", fixtures=None, placeholders=false, model=None, base_url="https://api.openai.com/v1"))]
    fn new(
        task: &str,
        data_dir: Option<PathBuf>,
        provider: &str,
        fixtures: Option<PathBuf>,
        placeholders: bool,
        model: Option<String>,
        base_url: &str,
    ) -> PyResult<Self> {
        let log = match data_dir {
            Some(dir) => EventStore::open(dir).and_then(|store| store.create_session(task)),
            None => SessionLog::in_memory(task),
        }
        .map_err(|err| engine_error(err.into()))?;
        let mut config = OrchestratorConfig::default();
        if let Some(model) = model {
            config.model_name = model;
        }
        Ok(Self {
            log: Mutex::new(log),
            provider: make_provider(provider, fixtures, placeholders, base_url)?,
            config,
        })
    }

    /// Reopens a persisted session.
    #[staticmethod]
    #[pyo3(signature = (session_id, data_dir, *, provider="mock", fixtures=None, placeholders=false, model=None, base_url="https://api.openai.com/v1"))]
    fn open(
        session_id: &str,
        data_dir: PathBuf,
        provider: &str,
        fixtures: Option<PathBuf>,
        placeholders: bool,
        model: Option<String>,
        base_url: &str,
    ) -> PyResult<Self> {
        let id = session_id
            .parse()
            .map_err(|_| validation(format!("not a session id: {session_id:?}"), "session_id"))?;
        let log = EventStore::open(data_dir)
            .and_then(|store| store.open_session(id))
            .map_err(|err| engine_error(err.into()))?;
        let mut config = OrchestratorConfig::default();
        if let Some(model) = model {
            config.model_name = model;
        }
        Ok(Self {
            log: Mutex::new(log),
            provider: make_provider(provider, fixtures, placeholders, base_url)?,
            config,
        })
    }

    #[getter]
    fn id(&self) -> PyResult<String> {
        self.with_log(|log| Ok(log.id().to_string()))
    }

    /// Id of the task root.
    #[getter]
    fn root(&self) -> PyResult<String> {
        self.with_log(|log| Ok(log.snapshot().graph.root_id().to_string()))
    }

    /// Ids of nodes whose name matches `name` after normalization.
    fn find(&self, name: &str) -> PyResult<Vec<String>> {
        self.with_log(|log| {
            Ok(log
                .snapshot()
                .graph
                .find_by_name(name)
                .iter()
                .map(|n| n.id.to_string())
                .collect())
        })
    }

    /// Runs one generation op. Releases the GIL while the provider works.
    #[pyo3(signature = (kind, focus, question=None))]
    fn run_op(&self, py: Python<'_>, kind: &str, focus: &str, question: Option<&str>) -> PyResult<Py<PyAny>> {
        let op: OpKind = parse_kind(kind, "kind")?;
        let focus = node_id(focus, "focus")?;
        let outcome = py.detach(|| {
            self.with_log(|log| {
                engine::run_op(log, self.provider.as_ref(), &self.config, op, focus, question, None)
                    .map_err(engine_error)
            })
        })?;
        to_py(py, &outcome)
    }

    /// Adds a user-authored Idea (under a Category) or Mitigation (under a Risk).
    #[pyo3(signature = (parent, kind, name, description=""))]
    fn add_node(&self, py: Python<'_>, parent: &str, kind: &str, name: &str, description: &str) -> PyResult<Py<PyAny>> {
        let parent = node_id(parent, "parent")?;
        let kind: NodeKind = parse_kind(kind, "kind")?;
        let node =
            self.with_log(|log| engine::add_user_node(log, parent, kind, name, description).map_err(engine_error))?;
        to_py(py, &node)
    }

    /// Pins a node; returns the pin list in order.
    fn pin(&self, node: &str) -> PyResult<Vec<String>> {
        let node = node_id(node, "node")?;
        let pins = self.with_log(|log| engine::pin(log, node).map_err(engine_error))?;
        Ok(pins.iter().map(ToString::to_string).collect())
    }

    fn unpin(&self, node: &str) -> PyResult<Vec<String>> {
        let node = node_id(node, "node")?;
        let pins = self.with_log(|log| engine::unpin(log, node).map_err(engine_error))?;
        Ok(pins.iter().map(ToString::to_string).collect())
    }

    /// `{nodes, edges, pins, last_seq}`, now or as of event `at`.
    #[pyo3(signature = (at=None))]
    fn snapshot(&self, py: Python<'_>, at: Option<EventSeq>) -> PyResult<Py<PyAny>> {
        let wire = self.with_log(|log| match at {
            None => Ok(log.snapshot().to_wire()),
            Some(at) => log
                .snapshot_at(at)
                .map(|s| s.to_wire())
                .map_err(|err| engine_error(err.into())),
        })?;
        to_py(py, &wire)
    }

    /// Pinned nodes with their paths from the task.
    fn collection(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let entries = self.with_log(|log| Ok(engine::collection(log.snapshot())))?;
        to_py(py, &entries)
    }

    /// The event log as dicts.
    fn events(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let events = self.with_log(|log| Ok(log.events().iter().map(|e| e.to_json()).collect::<Vec<_>>()))?;
        to_py(py, &events)
    }

    fn __repr__(&self) -> PyResult<String> {
        self.with_log(|log| {
            let snapshot = log.snapshot();
            Ok(format!(
                "Session(id={}, nodes={}, last_seq={})",
                log.id(),
                snapshot.graph.node_count(),
                snapshot.last_seq
            ))
        })
    }
}

/// Validates a raw model reply for `op`; raises `ReplyError` if unusable.
#[pyfunction]
fn parse_reply(py: Python<'_>, op: &str, raw: &str) -> PyResult<Py<PyAny>> {
    let op: OpKind = parse_kind(op, "op")?;
    match orchestrator::parse_reply(op, raw) {
        Ok(payload) => to_py(py, &payload),
        Err(err) => {
            let py_err = ReplyError::new_err(err.to_string());
            let value = py_err.value(py);
            value.setattr("code", ErrorCode::GenerationFailed.as_str())?;
            value.setattr("detail", err.path())?;
            value.setattr("error_class", err.class())?;
            value.setattr("path", err.path())?;
            Err(py_err)
        }
    }
}

/// Folds the text of a `.events.jsonl` log into a wire snapshot.
#[pyfunction]
#[pyo3(signature = (text, at=None))]
fn replay(py: Python<'_>, text: &str, at: Option<EventSeq>) -> PyResult<Py<PyAny>> {
    let corrupt = |err: CorruptLogError| {
        let py_err = FlexMindError::new_err(err.to_string());
        let value = py_err.value(py);
        let _ = value.setattr("code", "corrupt_log");
        let _ = value.setattr("detail", err.seq.to_string());
        py_err
    };
    let (events, mut snapshot) = replay_text(text).map_err(corrupt)?;
    if let Some(at) = at {
        if at > snapshot.last_seq {
            return Err(validation(
                format!("at {at} is past the last event ({})", snapshot.last_seq),
                "at",
            ));
        }
        snapshot = flexmind_core::store::replay(&events[..=at as usize]).map_err(corrupt)?;
    }
    to_py(py, &snapshot.to_wire())
}

/// The form names are compared in.
#[pyfunction]
fn normalize_name(name: &str) -> String {
    flexmind_core::normalize_name(name)
}

#[pymodule]
fn flexmind(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(parse_reply, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_name, m)?)?;
    m.add("FlexMindError", m.py().get_type::<FlexMindError>())?;
    m.add("ReplyError", m.py().get_type::<ReplyError>())?;
    m.add("OP_KINDS", OpKind::ALL.iter().map(|op| op.as_str()).collect::<Vec<_>>())?;
    Ok(())
}
