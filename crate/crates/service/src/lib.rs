//! HTTP facade for FlexMind sessions.
//!
//! Writes to one session run strictly one at a time, in arrival order; reads
//! are served from the state published after the last write and never wait
//! on a running op. Every appended event is fanned out to the session's
//! `/stream` subscribers.

mod error;
mod routes;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use flexmind_core::orchestrator::Provider;
use flexmind_core::{
    EngineError, ErrorCode, EventStore, OrchestratorConfig, SessionEvent, SessionId, SessionLog, SessionSnapshot,
};
use tokio::sync::broadcast;

pub use error::ApiError;
pub use routes::router;

/// Default `--listen` address.
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8787";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// How long a write waits for the session before giving up with 409.
    pub lock_wait: Duration,
    /// Interval between heartbeat comments on idle streams.
    pub heartbeat: Duration,
    /// Events a stream subscriber may fall behind before it is disconnected.
    pub stream_buffer: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            lock_wait: Duration::from_secs(30),
            heartbeat: Duration::from_secs(15),
            stream_buffer: 256,
        }
    }
}

/// Shared service state; cheap to clone.
#[derive(Clone)]
pub struct AppState(Arc<Inner>);

struct Inner {
    store: EventStore,
    provider: Arc<dyn Provider>,
    orchestrator: OrchestratorConfig,
    config: ServiceConfig,
    sessions: Mutex<HashMap<SessionId, Arc<Slot>>>,
}

/// What readers see: the log as of the last completed write.
struct Published {
    events: Vec<SessionEvent>,
    snapshot: SessionSnapshot,
}

struct Slot {
    log: Arc<tokio::sync::Mutex<SessionLog>>,
    published: RwLock<Arc<Published>>,
    events: broadcast::Sender<SessionEvent>,
}

impl Slot {
    fn new(log: SessionLog, buffer: usize) -> Self {
        let published = Published {
            events: log.events().to_vec(),
            snapshot: log.snapshot().clone(),
        };
        Self {
            log: Arc::new(tokio::sync::Mutex::new(log)),
            published: RwLock::new(Arc::new(published)),
            events: broadcast::channel(buffer.max(1)).0,
        }
    }

    fn published(&self) -> Arc<Published> {
        self.published.read().expect("publisher never panics").clone()
    }

    /// Makes events from index `from` on visible to readers and subscribers.
    fn publish(&self, log: &SessionLog, from: usize) {
        if log.events().len() == from {
            return;
        }
        let published = Published {
            events: log.events().to_vec(),
            snapshot: log.snapshot().clone(),
        };
        *self.published.write().expect("publisher never panics") = Arc::new(published);
        for event in &log.events()[from..] {
            // No subscribers is fine.
            let _ = self.events.send(event.clone());
        }
    }
}

impl AppState {
    pub fn new(
        store: EventStore,
        provider: Arc<dyn Provider>,
        orchestrator: OrchestratorConfig,
        config: ServiceConfig,
    ) -> Self {
        Self(Arc::new(Inner {
            store,
            provider,
            orchestrator,
            config,
            sessions: Mutex::new(HashMap::new()),
        }))
    }

    pub fn store(&self) -> &EventStore {
        &self.0.store
    }

    fn slot(&self, id: SessionId) -> Result<Arc<Slot>, ApiError> {
        let mut sessions = self.0.sessions.lock().expect("session map never poisoned");
        if let Some(slot) = sessions.get(&id) {
            return Ok(slot.clone());
        }
        let log = self.0.store.open_session(id)?;
        let slot = Arc::new(Slot::new(log, self.0.config.stream_buffer));
        sessions.insert(id, slot.clone());
        Ok(slot)
    }

    fn insert(&self, log: SessionLog) -> Arc<Slot> {
        let id = log.id();
        let slot = Arc::new(Slot::new(log, self.0.config.stream_buffer));
        self.0
            .sessions
            .lock()
            .expect("session map never poisoned")
            .insert(id, slot.clone());
        slot
    }

    /// Runs `write` with exclusive access to the session's log, then publishes
    /// whatever it appended, error or not.
    async fn write<T, F>(&self, slot: &Arc<Slot>, write: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut SessionLog) -> Result<T, EngineError> + Send + 'static,
    {
        let wait = self.0.config.lock_wait;
        let guard = tokio::time::timeout(wait, slot.log.clone().lock_owned())
            .await
            .map_err(|_| {
                ApiError::new(
                    ErrorCode::Conflict,
                    format!("session is busy; gave up after waiting {} ms", wait.as_millis()),
                )
            })?;
        let slot = slot.clone();
        tokio::task::spawn_blocking(move || {
            let mut log = guard;
            let before = log.events().len();
            let result = write(&mut log);
            slot.publish(&log, before);
            result
        })
        .await
        .map_err(|err| ApiError::new(ErrorCode::ProviderUnavailable, format!("session worker failed: {err}")))?
        .map_err(ApiError::from)
    }
}

/// Binds the router to `listener` and serves until the process ends.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

/// Serves on a background thread with its own runtime and returns the bound
/// address. Meant for tests and embedding; the server lives as long as the process.
pub fn spawn(listen: &str, state: AppState) -> std::io::Result<std::net::SocketAddr> {
    let listener = std::net::TcpListener::bind(listen)?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    std::thread::Builder::new()
        .name(format!("flexmind-service-{addr}"))
        .spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener is non-blocking");
                if let Err(err) = serve(listener, state).await {
                    tracing::error!("service stopped: {err}");
                }
            })
        })?;
    Ok(addr)
}
