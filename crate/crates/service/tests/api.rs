use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use flexmind_core::orchestrator::{CompletionRequest, Provider, ProviderError};
use flexmind_core::{EventStore, MockProvider, OpKind, OrchestratorConfig};
use flexmind_service::{spawn, AppState, ServiceConfig};
use serde_json::{json, Value};

const TASK: &str = "cleaning laundry with less water";

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/mock")
}

struct Server {
    base: String,
    agent: ureq::Agent,
    store: EventStore,
    _dir: tempfile::TempDir,
}

impl Server {
    fn start(provider: Arc<dyn Provider>, config: ServiceConfig) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        let state = AppState::new(store.clone(), provider, OrchestratorConfig::default(), config);
        let addr = spawn("127.0.0.1:0", state).unwrap();
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self {
            base: format!("http://{addr}"),
            agent,
            store,
            _dir: dir,
        }
    }

    fn mock() -> Self {
        Self::start(Arc::new(MockProvider::from_dir(fixtures())), ServiceConfig::default())
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn read(mut response: ureq::http::Response<ureq::Body>) -> (u16, Value) {
        let status = response.status().as_u16();
        let body = response.body_mut().read_json::<Value>().unwrap_or(Value::Null);
        (status, body)
    }

    fn get(&self, path: &str) -> (u16, Value) {
        Self::read(self.agent.get(self.url(path)).call().unwrap())
    }

    fn post(&self, path: &str, body: Value) -> (u16, Value) {
        Self::read(self.agent.post(self.url(path)).send_json(&body).unwrap())
    }

    fn delete(&self, path: &str) -> (u16, Value) {
        Self::read(self.agent.delete(self.url(path)).call().unwrap())
    }

    fn create(&self, task: &str) -> String {
        let (status, body) = self.post("/v1/sessions", json!({ "task": task }));
        assert_eq!(status, 201, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }

    fn root(&self, session: &str) -> String {
        let (_, snapshot) = self.get(&format!("/v1/sessions/{session}"));
        snapshot["nodes"][0]["id"].as_str().unwrap().to_string()
    }

    fn op(&self, session: &str, body: Value) -> (u16, Value) {
        self.post(&format!("/v1/sessions/{session}/ops"), body)
    }

    fn find(&self, session: &str, name: &str) -> String {
        let (_, snapshot) = self.get(&format!("/v1/sessions/{session}"));
        let matches: Vec<&Value> = snapshot["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|n| n["name"].as_str().unwrap().eq_ignore_ascii_case(name))
            .collect();
        assert_eq!(matches.len(), 1, "{name}");
        matches[0]["id"].as_str().unwrap().to_string()
    }

    /// GET must always equal a replay of what is on disk.
    fn assert_matches_disk(&self, session: &str) {
        let (_, served) = self.get(&format!("/v1/sessions/{session}"));
        let on_disk = self.store.load(session.parse().unwrap()).unwrap().to_wire();
        assert_eq!(served, serde_json::to_value(on_disk).unwrap());
    }
}

fn assert_error(response: (u16, Value), status: u16, code: &str) -> Value {
    let (actual, body) = response;
    assert_eq!((actual, body["code"].as_str()), (status, Some(code)), "{body}");
    assert!(body["message"].as_str().is_some_and(|m| !m.is_empty()));
    body
}

#[test]
fn healthz_and_unknown_routes() {
    let server = Server::mock();
    assert_eq!(server.get("/healthz"), (200, json!({"ok": true})));
    assert_error(server.get("/nope"), 404, "not_found");
    let (status, body) = server.delete("/v1/sessions");
    assert_eq!(status, 405);
    assert_eq!(body["code"], "not_found");
}

#[test]
fn creating_sessions() {
    let server = Server::mock();
    let (status, body) = server.post("/v1/sessions", json!({"task": TASK}));
    assert_eq!(status, 201);
    assert_eq!(body["snapshot"]["nodes"].as_array().unwrap().len(), 1);
    assert_eq!(body["snapshot"]["nodes"][0]["kind"], "Task");
    assert_eq!(body["snapshot"]["last_seq"], 0);
    assert_eq!(body["snapshot"]["pins"], json!([]));

    let body = assert_error(server.post("/v1/sessions", json!({"task": ""})), 400, "validation");
    assert_eq!(body["detail"], "task");
    assert_error(
        server.post("/v1/sessions", json!({"task": "x".repeat(501)})),
        400,
        "validation",
    );
    assert_error(
        server.post("/v1/sessions", json!({"task": TASK, "extra": 1})),
        400,
        "validation",
    );
    let raw = server
        .agent
        .post(server.url("/v1/sessions"))
        .content_type("application/json")
        .send("{not json")
        .unwrap();
    assert_error(Server::read(raw), 400, "validation");

    server.create("minimizing accidents from people walking and texting on a cell phone");
    let (status, list) = server.get("/v1/sessions");
    assert_eq!(status, 200);
    let tasks: Vec<&str> = list["sessions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["task"].as_str().unwrap())
        .collect();
    assert!(tasks.contains(&TASK));
    assert!(tasks.contains(&"minimizing accidents from people walking and texting on a cell phone"));
}

#[test]
fn walkthrough_over_http() {
    let server = Server::mock();
    let session = server.create(TASK);
    let root = server.root(&session);

    let (status, init) = server.op(&session, json!({"kind": "InitializeSpace", "focus": root}));
    assert_eq!(status, 200, "{init}");
    assert_eq!(init["added_nodes"].as_array().unwrap().len(), 16);
    assert_eq!(init["exchange"]["attempts"], 1);
    assert!(init.get("answer").is_none());
    assert!(init["added_nodes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n["name"] == "Chemical Deodorizers"));
    server.assert_matches_disk(&session);

    let lemon = server.find(&session, "Lemon Spray");
    let (status, similar) = server.op(&session, json!({"kind": "FindSimilar", "focus": lemon}));
    assert_eq!(status, 200, "{similar}");
    assert_eq!(similar["added_nodes"].as_array().unwrap().len(), 11);

    let applicator = server.find(&session, "pen-style concentrate applicator");
    let (status, pins) = server.post(&format!("/v1/sessions/{session}/pins"), json!({"node": applicator}));
    assert_eq!((status, pins), (200, json!({"pins": [applicator]})));

    let question = "If some lemon solution remains on the fabric, will it enhance or interfere with detergent?";
    let (status, answer) = server.op(
        &session,
        json!({"kind": "AnswerQuestion", "focus": applicator, "question": question}),
    );
    assert_eq!(status, 200, "{answer}");
    let text = answer["answer"].as_str().unwrap();
    assert!(!text.is_empty() && text.chars().count() <= 1200);

    let (status, risks) = server.op(&session, json!({"kind": "DiagnoseRisks", "focus": lemon}));
    assert_eq!(status, 200);
    assert!(risks["added_nodes"]
        .as_array()
        .unwrap()
        .iter()
        .any(|n| n["name"] == "Limited Cleaning"));
    let limited = server.find(&session, "limited cleaning");
    let (status, _) = server.op(&session, json!({"kind": "MitigateRisk", "focus": limited}));
    assert_eq!(status, 200);

    let (status, added) = server.post(
        &format!("/v1/sessions/{session}/nodes"),
        json!({"parent": limited, "kind": "Mitigation", "name": "a hydrogen peroxide and lemon mix spray", "description": ""}),
    );
    assert_eq!(status, 201, "{added}");
    assert_eq!(added["node"]["provenance"], "User");
    let mine = added["node"]["id"].as_str().unwrap().to_string();
    let (_, pins) = server.post(&format!("/v1/sessions/{session}/pins"), json!({"node": mine}));
    assert_eq!(pins["pins"], json!([applicator, mine]));
    server.assert_matches_disk(&session);

    let (_, snapshot) = server.get(&format!("/v1/sessions/{session}"));
    assert_eq!(snapshot["nodes"].as_array().unwrap().len(), 36);
    assert_eq!(snapshot["edges"].as_array().unwrap().len(), 37);
    assert_eq!(snapshot["last_seq"], 8);

    let (status, collection) = server.get(&format!("/v1/sessions/{session}/collection"));
    assert_eq!(status, 200);
    let entries = collection["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["node"]["id"], json!(applicator));
    assert_eq!(
        entries[1]["path"].as_array().unwrap().last().unwrap(),
        "a hydrogen peroxide and lemon mix spray"
    );

    // Historical views.
    let (_, first) = server.get(&format!("/v1/sessions/{session}?at=0"));
    assert_eq!(first["nodes"].as_array().unwrap().len(), 1);
    assert_eq!(first["nodes"][0]["kind"], "Task");
    assert_eq!(first["edges"], json!([]));
    let (_, after_init) = server.get(&format!("/v1/sessions/{session}?at=1"));
    assert_eq!(after_init["nodes"].as_array().unwrap().len(), 17);
    let log = server.store.read_events(session.parse().unwrap()).unwrap();
    for at in 0..log.len() as u64 {
        let (_, served) = server.get(&format!("/v1/sessions/{session}?at={at}"));
        let expected = server
            .store
            .snapshot_at(session.parse().unwrap(), at)
            .unwrap()
            .to_wire();
        assert_eq!(served, serde_json::to_value(expected).unwrap());
    }
    let body = assert_error(server.get(&format!("/v1/sessions/{session}?at=9")), 400, "validation");
    assert_eq!(body["detail"], "at");
    assert_error(
        server.get(&format!("/v1/sessions/{session}?at=later")),
        400,
        "validation",
    );

    // Unpin.
    let (status, pins) = server.delete(&format!("/v1/sessions/{session}/pins/{applicator}"));
    assert_eq!((status, pins), (200, json!({"pins": [mine]})));
    assert_error(
        server.delete(&format!("/v1/sessions/{session}/pins/{applicator}")),
        404,
        "not_found",
    );
}

#[test]
fn error_taxonomy() {
    let provider =
        MockProvider::from_dir(fixtures()).with_fixture(OpKind::DiagnoseRisks, "Baking Soda Dusting", "no json here");
    let server = Server::start(Arc::new(provider), ServiceConfig::default());
    let missing = "0".repeat(32);
    assert_error(server.get(&format!("/v1/sessions/{missing}")), 404, "not_found");
    assert_error(server.get("/v1/sessions/not-an-id"), 404, "not_found");
    assert_error(server.get(&format!("/v1/sessions/{missing}/stream")), 404, "not_found");

    let session = server.create(TASK);
    let root = server.root(&session);
    let body = assert_error(
        server.op(&session, json!({"kind": "InitializeSpace", "focus": missing})),
        404,
        "unknown_node",
    );
    assert_eq!(body["detail"], json!(missing));
    assert_error(
        server.op(&session, json!({"kind": "Brainstorm", "focus": root})),
        400,
        "validation",
    );
    assert_error(
        server.op(&session, json!({"kind": "DiagnoseRisks", "focus": root})),
        422,
        "bad_precondition",
    );
    let body = assert_error(
        server.op(&session, json!({"kind": "AnswerQuestion", "focus": root})),
        400,
        "validation",
    );
    assert_eq!(body["detail"], "question");
    assert_error(
        server.op(
            &session,
            json!({"kind": "AnswerQuestion", "focus": root, "question": "   "}),
        ),
        400,
        "validation",
    );
    assert_error(
        server.op(
            &session,
            json!({"kind": "InitializeSpace", "focus": root, "question": "why?"}),
        ),
        400,
        "validation",
    );
    assert_eq!(
        server.store.read_events(session.parse().unwrap()).unwrap().len(),
        1,
        "rejections append nothing"
    );

    let (status, _) = server.op(&session, json!({"kind": "InitializeSpace", "focus": root}));
    assert_eq!(status, 200);
    let soda = server.find(&session, "baking soda dusting");
    let category = server.find(&session, "chemical deodorizers");
    let body = assert_error(
        server.op(&session, json!({"kind": "DiagnoseRisks", "focus": soda})),
        502,
        "generation_failed",
    );
    assert!(body["message"].as_str().unwrap().contains("after 3 attempt"), "{body}");
    let (_, snapshot) = server.get(&format!("/v1/sessions/{session}"));
    assert_eq!(snapshot["last_seq"], 2, "the failure is logged");
    assert_error(
        server.op(&session, json!({"kind": "FindSimilar", "focus": soda})),
        503,
        "provider_unavailable",
    );

    let nodes = format!("/v1/sessions/{session}/nodes");
    assert_error(
        server.post(
            &nodes,
            json!({"parent": soda, "kind": "Idea", "name": "Idea under an idea"}),
        ),
        422,
        "bad_precondition",
    );
    assert_error(
        server.post(
            &nodes,
            json!({"parent": category, "kind": "Idea", "name": "  LEMON   spray "}),
        ),
        409,
        "conflict",
    );
    assert_error(
        server.post(&nodes, json!({"parent": category, "kind": "Risk", "name": "A risk"})),
        400,
        "validation",
    );
    assert_error(
        server.post(&nodes, json!({"parent": missing, "kind": "Idea", "name": "x"})),
        404,
        "unknown_node",
    );

    let pins = format!("/v1/sessions/{session}/pins");
    assert_error(server.post(&pins, json!({"node": category})), 422, "bad_precondition");
    assert_error(server.post(&pins, json!({"node": missing})), 404, "unknown_node");
    assert_error(server.delete(&format!("{pins}/{soda}")), 404, "not_found");
    assert_error(server.delete(&format!("{pins}/zz")), 400, "validation");
    server.assert_matches_disk(&session);
}

#[test]
fn pins_keep_order() {
    let server = Server::mock();
    let session = server.create(TASK);
    let root = server.root(&session);
    server.op(&session, json!({"kind": "InitializeSpace", "focus": root}));
    let x = server.find(&session, "lemon spray");
    let y = server.find(&session, "spot-clean kit");
    let pins = format!("/v1/sessions/{session}/pins");
    server.post(&pins, json!({"node": x}));
    let (_, again) = server.post(&pins, json!({"node": x}));
    assert_eq!(again["pins"], json!([x]), "re-pinning is a no-op");
    server.post(&pins, json!({"node": y}));
    let (_, after) = server.delete(&format!("{pins}/{x}"));
    assert_eq!(after["pins"], json!([y]));
}

/// Reads SSE frames on a background thread as `(event, data)` pairs;
/// heartbeat comments arrive as `(":", text)`.
fn subscribe(server: &Server, session: &str) -> mpsc::Receiver<(String, String)> {
    let response = server
        .agent
        .get(server.url(&format!("/v1/sessions/{session}/stream")))
        .call()
        .unwrap();
    assert_eq!(response.status().as_u16(), 200);
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let reader = BufReader::new(response.into_body().into_reader());
        let mut event = String::new();
        for line in reader.lines() {
            let Ok(line) = line else { return };
            if let Some(comment) = line.strip_prefix(':') {
                let _ = tx.send((":".into(), comment.trim().to_string()));
            } else if let Some(name) = line.strip_prefix("event:") {
                event = name.trim().to_string();
            } else if let Some(data) = line.strip_prefix("data:") {
                if tx.send((std::mem::take(&mut event), data.trim().to_string())).is_err() {
                    return;
                }
            }
        }
    });
    rx
}

fn next_frame(rx: &mpsc::Receiver<(String, String)>) -> (String, Value) {
    loop {
        let (event, data) = rx.recv_timeout(Duration::from_secs(5)).expect("a frame");
        if event != ":" {
            return (event, serde_json::from_str(&data).unwrap());
        }
    }
}

#[test]
fn stream_delivers_each_event_once() {
    let similar = json!({
        "attributes": [{"name": "Absorbency", "rationale": "Powder soaks up odors."}, {"name": "Dryness", "rationale": "No water involved."}],
        "categories": [
            {"name": "Chemical Deodorizers", "description": "", "from_attribute": "Absorbency",
             "ideas": [{"name": "Charcoal Sachet", "description": ""}, {"name": "Cornstarch Shake", "description": ""}]},
            {"name": "Powder Absorbents", "description": "", "from_attribute": "Dryness",
             "ideas": [{"name": "Clay Powder", "description": ""}, {"name": "Rice Bag", "description": ""}]}
        ]
    });
    let provider = MockProvider::from_dir(fixtures()).with_fixture(
        OpKind::FindSimilar,
        "Baking Soda Dusting",
        similar.to_string(),
    );
    let server = Server::start(Arc::new(provider), ServiceConfig::default());
    let session = server.create(TASK);
    let root = server.root(&session);
    server.op(&session, json!({"kind": "InitializeSpace", "focus": root}));

    let rx = subscribe(&server, &session);
    let (event, hello) = next_frame(&rx);
    assert_eq!((event.as_str(), hello), ("hello", json!({"last_seq": 1})));

    let lemon = server.find(&session, "lemon spray");
    server.post(&format!("/v1/sessions/{session}/pins"), json!({"node": lemon}));
    let (event, data) = next_frame(&rx);
    assert_eq!(event, "NodePinned");
    assert_eq!(
        (data["seq"].clone(), data["kind"].clone()),
        (json!(2), json!("NodePinned"))
    );
    assert_eq!(data["payload"]["node"], json!(lemon));

    let soda = server.find(&session, "baking soda dusting");
    let (status, _) = server.op(&session, json!({"kind": "FindSimilar", "focus": soda}));
    assert_eq!(status, 200);
    let (event, data) = next_frame(&rx);
    assert_eq!(event, "GenerationCompleted");
    assert_eq!(data["payload"]["nodes"].as_array().unwrap().len(), 7);
    // The frame is the event exactly as logged.
    let logged = server.store.read_events(session.parse().unwrap()).unwrap();
    assert_eq!(data, logged[3].to_json());
    assert!(rx
        .recv_timeout(Duration::from_millis(200))
        .map_or(true, |(e, _)| e == ":"));
}

#[test]
fn idle_stream_gets_heartbeats() {
    let config = ServiceConfig {
        heartbeat: Duration::from_millis(100),
        ..ServiceConfig::default()
    };
    let server = Server::start(Arc::new(MockProvider::from_dir(fixtures())), config);
    let session = server.create(TASK);
    let rx = subscribe(&server, &session);
    let (event, _) = rx.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!(event, "hello");
    let (event, text) = rx.recv_timeout(Duration::from_secs(5)).unwrap();
    assert_eq!((event.as_str(), text.as_str()), (":", "heartbeat"));
}

/// Placeholder replies after a pause, tracking how many calls overlap.
struct Slow {
    inner: MockProvider,
    pause: Duration,
    active: AtomicUsize,
    peak: AtomicUsize,
}

impl Slow {
    fn new(pause: Duration) -> Arc<Self> {
        Arc::new(Self {
            inner: MockProvider::placeholders_only(),
            pause,
            active: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        })
    }
}

impl Provider for Slow {
    fn id(&self) -> String {
        "slow".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        std::thread::sleep(self.pause);
        self.active.fetch_sub(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

#[test]
fn writes_to_one_session_are_serialized() {
    let slow = Slow::new(Duration::from_millis(150));
    let server = Arc::new(Server::start(slow.clone(), ServiceConfig::default()));
    let session = server.create(TASK);
    let root = server.root(&session);
    server.op(&session, json!({"kind": "InitializeSpace", "focus": root}));
    let (_, snapshot) = server.get(&format!("/v1/sessions/{session}"));
    let ideas: Vec<String> = snapshot["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|n| n["kind"] == "Idea")
        .map(|n| n["id"].as_str().unwrap().to_string())
        .collect();

    let started = Instant::now();
    let handles: Vec<_> = ideas
        .iter()
        .take(4)
        .cloned()
        .map(|idea| {
            let server = server.clone();
            let session = session.clone();
            std::thread::spawn(move || server.op(&session, json!({"kind": "DiagnoseRisks", "focus": idea})).0)
        })
        .collect();
    // Reads are not held up by the queue.
    std::thread::sleep(Duration::from_millis(50));
    let read_started = Instant::now();
    assert_eq!(server.get(&format!("/v1/sessions/{session}")).0, 200);
    assert!(read_started.elapsed() < Duration::from_millis(140));

    let statuses: Vec<u16> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(statuses, [200; 4]);
    assert_eq!(slow.peak.load(Ordering::SeqCst), 1);
    assert!(started.elapsed() >= Duration::from_millis(600));
    let events = server.store.read_events(session.parse().unwrap()).unwrap();
    let seqs: Vec<u64> = events.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, (0..6).collect::<Vec<_>>());
    server.assert_matches_disk(&session);
}

#[test]
fn waiting_too_long_is_a_conflict() {
    let slow = Slow::new(Duration::from_millis(600));
    let config = ServiceConfig {
        lock_wait: Duration::from_millis(100),
        ..ServiceConfig::default()
    };
    let server = Arc::new(Server::start(slow, config));
    let session = server.create(TASK);
    let root = server.root(&session);
    let first = {
        let (server, session, root) = (server.clone(), session.clone(), root.clone());
        std::thread::spawn(move || server.op(&session, json!({"kind": "InitializeSpace", "focus": root})).0)
    };
    std::thread::sleep(Duration::from_millis(150));
    let body = assert_error(
        server.op(&session, json!({"kind": "InitializeSpace", "focus": root})),
        409,
        "conflict",
    );
    assert!(body["message"].as_str().unwrap().contains("busy"));
    assert_eq!(first.join().unwrap(), 200);
}
