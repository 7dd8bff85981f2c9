//! Engine for opt-in AI support during ideation.
//!
//! A session is a typed design-space graph ([`graph`]) grown only by
//! appending events ([`store`]). Generation happens solely when the user asks
//! for it: [`orchestrator`] turns one request into a prompt, calls a
//! [`orchestrator::Provider`], validates the reply and emits new nodes.
//! [`engine`] ties the pieces into the actions a front end exposes.

pub mod engine;
pub mod graph;
pub mod orchestrator;
pub mod store;

pub use engine::{EngineError, ErrorCode, OpOutcome};
pub use graph::{
    normalize_name, DesignGraph, Edge, EdgeKind, EventSeq, IdeationNode, NodeBatch, NodeId, NodeKind, PinSet,
    Provenance, SessionId,
};
pub use orchestrator::{MockProvider, OpKind, OrchestratorConfig, Provider};
pub use store::{EventPayload, EventStore, SessionEvent, SessionLog, SessionSnapshot};
