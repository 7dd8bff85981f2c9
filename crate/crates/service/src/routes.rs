use std::convert::Infallible;
use std::str::FromStr;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use flexmind_core::engine;
use flexmind_core::orchestrator::CancelToken;
use flexmind_core::store::{replay, task_problem};
use flexmind_core::{ErrorCode, NodeId, NodeKind, OpKind, SessionId};
use futures::stream::{self, Stream, StreamExt};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::{ApiError, AppState};

type ApiResult<T> = Result<T, ApiError>;
type Body<T> = Result<Json<T>, JsonRejection>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/sessions", post(create_session).get(list_sessions))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/ops", post(run_op))
        .route("/v1/sessions/{id}/nodes", post(add_node))
        .route("/v1/sessions/{id}/pins", post(pin))
        .route("/v1/sessions/{id}/pins/{node}", delete(unpin))
        .route("/v1/sessions/{id}/collection", get(collection))
        .route("/v1/sessions/{id}/stream", get(stream_events))
        .fallback(no_route)
        .method_not_allowed_fallback(wrong_method)
        .with_state(state)
}

async fn healthz() -> Json<Value> {
    Json(json!({"ok": true}))
}

async fn no_route() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

async fn wrong_method() -> Response {
    let body = json!({"code": ErrorCode::NotFound, "message": "method not allowed on this endpoint", "detail": null});
    (StatusCode::METHOD_NOT_ALLOWED, Json(body)).into_response()
}

fn session_id(raw: &str) -> ApiResult<SessionId> {
    SessionId::from_str(raw)
        .map_err(|_| ApiError::new(ErrorCode::NotFound, format!("session {raw} not found")).with_detail(raw))
}

fn node_id(raw: &str, field: &str) -> ApiResult<NodeId> {
    NodeId::from_str(raw).map_err(|err| ApiError::validation(err.to_string(), field))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    task: String,
}

async fn create_session(State(state): State<AppState>, body: Body<CreateSession>) -> ApiResult<Response> {
    let Json(body) = body?;
    let task = body.task.trim();
    if let Some(problem) = task_problem(task) {
        return Err(ApiError::validation(problem, "task"));
    }
    let log = state.store().create_session(task)?;
    let reply = json!({
        "session_id": log.id(),
        "snapshot": log.snapshot().to_wire(),
    });
    state.insert(log);
    Ok((StatusCode::CREATED, Json(reply)).into_response())
}

async fn list_sessions(State(state): State<AppState>) -> ApiResult<Json<Value>> {
    let sessions = state.store().list_sessions()?;
    Ok(Json(json!({ "sessions": sessions })))
}

#[derive(Deserialize)]
struct AtQuery {
    at: Option<u64>,
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<AtQuery>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let slot = state.slot(session_id(&id)?)?;
    let Query(query) = query.map_err(|err| ApiError::from(err).with_detail("at"))?;
    let published = slot.published();
    let last = published.snapshot.last_seq;
    let wire = match query.at {
        None => published.snapshot.to_wire(),
        Some(at) if at > last => {
            return Err(ApiError::validation(
                format!("at={at} is past the last event ({last})"),
                "at",
            ))
        }
        Some(at) if at == last => published.snapshot.to_wire(),
        Some(at) => replay(&published.events[..=at as usize])
            .map_err(flexmind_core::store::StoreError::from)?
            .to_wire(),
    };
    Ok(Json(serde_json::to_value(wire).expect("snapshots serialize")))
}

async fn collection(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let slot = state.slot(session_id(&id)?)?;
    let published = slot.published();
    Ok(Json(json!({ "entries": engine::collection(&published.snapshot) })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OpRequest {
    kind: String,
    focus: String,
    question: Option<String>,
}

/// Cancels the provider call if the client goes away mid-op.
struct CancelOnDrop(CancelToken);

impl Drop for CancelOnDrop {
    fn drop(&mut self) {
        self.0.cancel();
    }
}

async fn run_op(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Body<OpRequest>,
) -> ApiResult<Json<Value>> {
    let slot = state.slot(session_id(&id)?)?;
    let Json(request) = body?;
    let op = OpKind::from_str(&request.kind).map_err(|err| ApiError::validation(err, "kind"))?;
    let focus = node_id(&request.focus, "focus")?;
    let question = match (op.takes_question(), request.question) {
        (true, Some(q)) if !q.trim().is_empty() => Some(q),
        (true, _) => {
            return Err(ApiError::validation(
                format!("{op} needs a non-empty question"),
                "question",
            ))
        }
        (false, None) => None,
        (false, Some(_)) => {
            return Err(ApiError::validation(
                format!("{op} does not take a question"),
                "question",
            ))
        }
    };

    let cancel = CancelToken::new();
    let _cancel_on_drop = CancelOnDrop(cancel.clone());
    let provider = state.0.provider.clone();
    let config = state.0.orchestrator.clone();
    let outcome = state
        .write(&slot, move |log| {
            engine::run_op(log, &*provider, &config, op, focus, question.as_deref(), Some(&cancel))
        })
        .await?;

    let mut reply = json!({
        "seq": outcome.seq,
        "added_nodes": outcome.added_nodes,
        "added_edges": outcome.added_edges,
        "exchange": {"attempts": outcome.attempts, "duration_ms": outcome.duration_ms},
    });
    if let Some(answer) = outcome.answer {
        reply["answer"] = Value::String(answer);
    }
    Ok(Json(reply))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AddNode {
    parent: String,
    kind: String,
    name: String,
    #[serde(default)]
    description: String,
}

async fn add_node(State(state): State<AppState>, Path(id): Path<String>, body: Body<AddNode>) -> ApiResult<Response> {
    let slot = state.slot(session_id(&id)?)?;
    let Json(body) = body?;
    let parent = node_id(&body.parent, "parent")?;
    let kind = NodeKind::from_str(&body.kind).map_err(|err| ApiError::validation(err, "kind"))?;
    let node = state
        .write(&slot, move |log| {
            engine::add_user_node(log, parent, kind, &body.name, &body.description)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(json!({ "node": node }))).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PinRequest {
    node: String,
}

async fn pin(State(state): State<AppState>, Path(id): Path<String>, body: Body<PinRequest>) -> ApiResult<Json<Value>> {
    let slot = state.slot(session_id(&id)?)?;
    let Json(body) = body?;
    let node = node_id(&body.node, "node")?;
    let pins = state.write(&slot, move |log| engine::pin(log, node)).await?;
    Ok(Json(json!({ "pins": pins })))
}

async fn unpin(State(state): State<AppState>, Path((id, node)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let slot = state.slot(session_id(&id)?)?;
    let node = node_id(&node, "node")?;
    let pins = state.write(&slot, move |log| engine::unpin(log, node)).await?;
    Ok(Json(json!({ "pins": pins })))
}

async fn stream_events(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let slot = state.slot(session_id(&id)?)?;
    // Subscribe before reading last_seq so nothing falls between the two.
    let receiver = slot.events.subscribe();
    let last_seq = slot.published().snapshot.last_seq;
    drop(slot);

    let hello = Event::default()
        .event("hello")
        .data(json!({ "last_seq": last_seq }).to_string());
    let events = stream::unfold(receiver, move |mut receiver| async move {
        loop {
            match receiver.recv().await {
                Ok(event) if event.seq <= last_seq => continue,
                Ok(event) => {
                    let frame = Event::default()
                        .id(event.seq.to_string())
                        .event(event.payload.kind())
                        .data(event.to_line());
                    return Some((Ok(frame), receiver));
                }
                // A subscriber that fell behind is cut off rather than slowing writers.
                Err(RecvError::Lagged(_)) | Err(RecvError::Closed) => return None,
            }
        }
    });
    let frames = stream::once(async move { Ok(hello) }).chain(events);
    Ok(Sse::new(frames).keep_alive(KeepAlive::new().interval(state.0.config.heartbeat).text("heartbeat")))
}
