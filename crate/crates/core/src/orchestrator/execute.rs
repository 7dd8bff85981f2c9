use std::collections::{HashMap, HashSet};
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::context::{assemble_context, SteeringContext};
use super::prompt::{render_prompt, render_repair_prompt};
use super::provider::{CancelToken, CompletionRequest, GenerationParams, Provider, ProviderError};
use super::reply::{parse_reply, ParseError, ReplyPayload};
use super::OpKind;
use crate::graph::{
    normalize_name, DesignGraph, EdgeKind, EventSeq, GraphError, IdeationNode, NodeBatch, NodeId, NodeKind, PinSet,
    Provenance, MAX_NAME_CHARS,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OrchestratorConfig {
    pub model_name: String,
    /// Repair attempts after the first call.
    pub max_retries: u32,
    pub max_output_chars: usize,
    /// Overrides the per-op default temperature when set.
    pub temperature: Option<f64>,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            model_name: "gpt-4o".into(),
            max_retries: 2,
            max_output_chars: 20_000,
            temperature: None,
        }
    }
}

impl OrchestratorConfig {
    pub fn params(&self, op: OpKind) -> GenerationParams {
        GenerationParams {
            model_name: self.model_name.clone(),
            temperature: self.temperature.unwrap_or_else(|| op.default_temperature()),
            max_output_chars: self.max_output_chars,
        }
    }
}

/// What the user asked for.
#[derive(Debug, Clone, Copy)]
pub struct ExecuteRequest<'a> {
    pub op: OpKind,
    pub focus: NodeId,
    pub question: Option<&'a str>,
}

/// Event sequence number and time stamped on every node of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeStamp {
    pub event: EventSeq,
    pub at: DateTime<Utc>,
}

/// Record of one operation's round-trips with the provider.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelExchange {
    pub op: OpKind,
    pub context: SteeringContext,
    pub rendered_prompt: String,
    /// Replies actually received, in attempt order.
    pub raw_replies: Vec<String>,
    pub parsed: Option<ReplyPayload>,
    pub attempts: u32,
    pub provider_id: String,
    pub duration_ms: u64,
    pub answer_truncated: bool,
}

impl ModelExchange {
    /// First 64 bits of SHA-256 over the rendered prompt and the final reply.
    pub fn digest(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update(self.rendered_prompt.as_bytes());
        hasher.update([0]);
        hasher.update(self.raw_replies.last().map(String::as_bytes).unwrap_or_default());
        let digest = hasher.finalize();
        u64::from_be_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecuteError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("{0}")]
    Precondition(String),
    #[error("provider failed after {} attempt(s): {error}", exchange.attempts)]
    Provider {
        error: ProviderError,
        exchange: Box<ModelExchange>,
    },
    #[error("no usable reply after {} attempt(s): {error}", exchange.attempts)]
    Generation {
        error: ParseError,
        exchange: Box<ModelExchange>,
    },
}

impl ExecuteError {
    pub fn exchange(&self) -> Option<&ModelExchange> {
        match self {
            ExecuteError::Provider { exchange, .. } | ExecuteError::Generation { exchange, .. } => Some(exchange),
            _ => None,
        }
    }
}

/// Runs one opt-in operation against `provider`.
///
/// Calls the provider at least once and at most `1 + max_retries` times. On
/// success returns System-provenance nodes (plus the user's Question node for
/// [`OpKind::AnswerQuestion`]) ready for [`DesignGraph::add_nodes`].
pub fn execute(
    request: ExecuteRequest<'_>,
    graph: &DesignGraph,
    pins: &PinSet,
    provider: &dyn Provider,
    config: &OrchestratorConfig,
    stamp: NodeStamp,
    cancel: Option<&CancelToken>,
) -> Result<(NodeBatch, ModelExchange), ExecuteError> {
    let op = request.op;
    let focus = graph
        .node(request.focus)
        .ok_or(ExecuteError::UnknownNode(request.focus))?;
    if !op.accepts_focus(focus.kind) {
        return Err(ExecuteError::Precondition(format!(
            "{op} cannot be applied to a {} node",
            focus.kind
        )));
    }
    let question = match (op.takes_question(), request.question.map(str::trim)) {
        (true, Some(q)) if !q.is_empty() => Some(q),
        (true, _) => return Err(ExecuteError::Precondition(format!("{op} needs a non-empty question"))),
        (false, Some(_)) => return Err(ExecuteError::Precondition(format!("{op} does not take a question"))),
        (false, None) => None,
    };

    let context = assemble_context(graph, pins, focus.id, question).map_err(|e| match e {
        GraphError::UnknownNode(id) => ExecuteError::UnknownNode(id),
        other => ExecuteError::Precondition(other.to_string()),
    })?;
    let prompt = render_prompt(op, &context).map_err(|e| ExecuteError::Precondition(e.to_string()))?;
    let params = config.params(op);

    let started = Instant::now();
    let mut exchange = ModelExchange {
        op,
        context,
        rendered_prompt: prompt.clone(),
        raw_replies: Vec::new(),
        parsed: None,
        attempts: 0,
        provider_id: provider.id(),
        duration_ms: 0,
        answer_truncated: false,
    };
    let mut attempt_prompt = prompt;
    let mut last_failure = None;

    while exchange.attempts <= config.max_retries {
        exchange.attempts += 1;
        let call = CompletionRequest {
            op,
            seed: &focus.name,
            prompt: &attempt_prompt,
            params: &params,
            cancel,
        };
        let raw = match provider.complete(&call) {
            Ok(raw) => raw,
            Err(ProviderError::Cancelled) => {
                last_failure = Some(ExecuteErrorKind::Provider(ProviderError::Cancelled));
                break;
            }
            Err(error) => {
                last_failure = Some(ExecuteErrorKind::Provider(error));
                continue;
            }
        };
        exchange.raw_replies.push(raw);
        let raw = exchange.raw_replies.last().expect("just pushed");
        match parse_reply(op, raw).and_then(|payload| check_against_focus(op, &payload, focus).map(|_| payload)) {
            Ok(payload) => {
                exchange.duration_ms = started.elapsed().as_millis() as u64;
                if let ReplyPayload::Answer(answer) = &payload {
                    exchange.answer_truncated = answer.truncated;
                }
                let batch = build_batch(graph, focus, question, &payload, stamp);
                exchange.parsed = Some(payload);
                return Ok((batch, exchange));
            }
            Err(error) => {
                attempt_prompt = render_repair_prompt(&exchange.rendered_prompt, &error);
                last_failure = Some(ExecuteErrorKind::Parse(error));
            }
        }
    }

    exchange.duration_ms = started.elapsed().as_millis() as u64;
    let exchange = Box::new(exchange);
    Err(match last_failure {
        Some(ExecuteErrorKind::Provider(error)) => ExecuteError::Provider { error, exchange },
        Some(ExecuteErrorKind::Parse(error)) => ExecuteError::Generation { error, exchange },
        None => unreachable!("the loop runs at least once"),
    })
}

enum ExecuteErrorKind {
    Provider(ProviderError),
    Parse(ParseError),
}

/// Checks that need the focus node, treated like schema failures.
fn check_against_focus(op: OpKind, payload: &ReplyPayload, focus: &IdeationNode) -> Result<(), ParseError> {
    if let (OpKind::ExpandCategory, ReplyPayload::Categories(reply)) = (op, payload) {
        let name = &reply.categories[0].name;
        if normalize_name(name) != focus.normalized_name() {
            return Err(ParseError::schema(
                "categories[0].name",
                format!("expected the category {:?}, got {name:?}", focus.name),
            ));
        }
    }
    Ok(())
}

fn clip_name(text: &str) -> String {
    let first_line = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    first_line
        .chars()
        .take(MAX_NAME_CHARS)
        .collect::<String>()
        .trim_end()
        .to_string()
}

/// Accumulates a batch while merging into existing categories and skipping
/// ideas a category already holds.
struct BatchBuilder<'g> {
    graph: &'g DesignGraph,
    stamp: NodeStamp,
    batch: NodeBatch,
    new_categories: HashMap<String, NodeId>,
    ideas: HashSet<(NodeId, String)>,
}

impl<'g> BatchBuilder<'g> {
    fn new(graph: &'g DesignGraph, stamp: NodeStamp) -> Self {
        Self {
            graph,
            stamp,
            batch: NodeBatch::default(),
            new_categories: HashMap::new(),
            ideas: HashSet::new(),
        }
    }

    fn node(&self, kind: NodeKind, name: &str, description: &str, provenance: Provenance) -> IdeationNode {
        IdeationNode::new(kind, name, description, provenance, self.stamp.at, self.stamp.event)
    }

    fn add(&mut self, node: IdeationNode, incoming: Vec<(NodeId, EdgeKind)>) -> NodeId {
        let id = node.id;
        self.batch.push(node, incoming);
        id
    }

    /// Resolves a category by normalized name, creating it under the root if
    /// needed. `inspired_by` is an (attribute, idea it abstracts) pair; the
    /// Inspires edge is left out when it would close a cycle.
    fn category(&mut self, name: &str, description: &str, inspired_by: Option<(NodeId, NodeId)>) -> NodeId {
        let key = normalize_name(name);
        if let Some(existing) = self.graph.find_category(name) {
            let id = existing.id;
            if let Some((attribute, idea)) = inspired_by {
                if !self.graph.reaches(id, idea) {
                    self.link(attribute, EdgeKind::Inspires, id);
                }
            }
            return id;
        }
        if let Some(&id) = self.new_categories.get(&key) {
            if let Some((attribute, _)) = inspired_by {
                self.link(attribute, EdgeKind::Inspires, id);
            }
            return id;
        }
        let mut incoming = vec![(self.graph.root_id(), EdgeKind::Contains)];
        if let Some((attribute, _)) = inspired_by {
            incoming.push((attribute, EdgeKind::Inspires));
        }
        let node = self.node(NodeKind::Category, name, description, Provenance::System);
        let id = self.add(node, incoming);
        self.new_categories.insert(key, id);
        id
    }

    fn link(&mut self, source: NodeId, kind: EdgeKind, target: NodeId) {
        let edge = crate::graph::Edge::new(source, kind, target);
        if !self.graph.contains_edge(&edge) && !self.batch.edges.contains(&edge) {
            self.batch.edges.push(edge);
        }
    }

    fn idea(&mut self, category: NodeId, name: &str, description: &str) {
        let key = normalize_name(name);
        let known = self.graph.contains_node(category)
            && self
                .graph
                .children(category, EdgeKind::Contains)
                .any(|n| n.normalized_name() == key);
        if known || !self.ideas.insert((category, key)) {
            return;
        }
        let node = self.node(NodeKind::Idea, name, description, Provenance::System);
        self.add(node, vec![(category, EdgeKind::Contains)]);
    }
}

fn build_batch(
    graph: &DesignGraph,
    focus: &IdeationNode,
    question: Option<&str>,
    payload: &ReplyPayload,
    stamp: NodeStamp,
) -> NodeBatch {
    let mut b = BatchBuilder::new(graph, stamp);
    match payload {
        ReplyPayload::Categories(reply) => {
            for draft in &reply.categories {
                let category = if focus.kind == NodeKind::Category {
                    focus.id
                } else {
                    b.category(&draft.name, &draft.description, None)
                };
                for idea in &draft.ideas {
                    b.idea(category, &idea.name, &idea.description);
                }
            }
        }
        ReplyPayload::Similar(reply) => {
            let mut attributes: HashMap<String, NodeId> = HashMap::new();
            for draft in &reply.attributes {
                let key = normalize_name(&draft.name);
                if attributes.contains_key(&key) {
                    continue;
                }
                let node = b.node(NodeKind::Attribute, &draft.name, &draft.rationale, Provenance::System);
                let id = b.add(node, vec![(focus.id, EdgeKind::Abstracts)]);
                attributes.insert(key, id);
            }
            for draft in &reply.categories {
                let attribute = attributes[&normalize_name(&draft.from_attribute)];
                let category = b.category(&draft.name, &draft.description, Some((attribute, focus.id)));
                for idea in &draft.ideas {
                    b.idea(category, &idea.name, &idea.description);
                }
            }
        }
        ReplyPayload::Risks(reply) => {
            for risk in &reply.risks {
                let node = b.node(NodeKind::Risk, &risk.name, &risk.description, Provenance::System);
                b.add(node, vec![(focus.id, EdgeKind::FlagsRisk)]);
            }
        }
        ReplyPayload::Mitigations(reply) => {
            for mitigation in &reply.mitigations {
                let node = b.node(
                    NodeKind::Mitigation,
                    &mitigation.name,
                    &mitigation.description,
                    Provenance::System,
                );
                b.add(node, vec![(focus.id, EdgeKind::Mitigates)]);
            }
        }
        ReplyPayload::Answer(reply) => {
            let question = question.expect("AnswerQuestion always carries a question");
            let asked = b.node(NodeKind::Question, &clip_name(question), question, Provenance::User);
            let asked = b.add(asked, vec![(focus.id, EdgeKind::Asks)]);
            let answer = b.node(
                NodeKind::Answer,
                &clip_name(&reply.answer),
                &reply.answer,
                Provenance::System,
            );
            b.add(answer, vec![(asked, EdgeKind::Answers)]);
        }
    }
    b.batch
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::MockProvider;

    struct Scripted(Vec<&'static str>, std::sync::atomic::AtomicUsize);

    impl Provider for Scripted {
        fn id(&self) -> String {
            "scripted".into()
        }

        fn complete(&self, _: &CompletionRequest<'_>) -> Result<String, ProviderError> {
            let i = self.1.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(self.0[i.min(self.0.len() - 1)].to_string())
        }
    }

    fn stamp(event: EventSeq) -> NodeStamp {
        NodeStamp { event, at: Utc::now() }
    }

    fn lemon_graph() -> (DesignGraph, NodeId, NodeId) {
        let root = IdeationNode::new(
            NodeKind::Task,
            "cleaning laundry with less water",
            "",
            Provenance::System,
            Utc::now(),
            0,
        );
        let graph = DesignGraph::new(root).unwrap();
        let category = IdeationNode::new(
            NodeKind::Category,
            "Chemical Deodorizers",
            "",
            Provenance::System,
            Utc::now(),
            1,
        );
        let idea = IdeationNode::new(NodeKind::Idea, "Lemon Spray", "", Provenance::System, Utc::now(), 1);
        let (category_id, idea_id) = (category.id, idea.id);
        let mut batch = NodeBatch::default();
        batch.push(category, [(graph.root_id(), EdgeKind::Contains)]);
        batch.push(idea, [(category_id, EdgeKind::Contains)]);
        (graph.add_nodes(&batch).unwrap(), category_id, idea_id)
    }

    const SIMILAR: &str = r#"{"attributes":[{"name":"Targeted Application","rationale":"r"},{"name":"Natural Acids","rationale":"r"}],
      "categories":[
        {"name":"chemical deodorizers","description":"d","from_attribute":"Natural Acids","ideas":[{"name":"Lemon Spray","description":""},{"name":"Vinegar Rinse Spray","description":""}]},
        {"name":"Targeted Stain Treatment","description":"d","from_attribute":"Targeted Application","ideas":[{"name":"Pen-Style Concentrate Applicator","description":""},{"name":"Stain Spot Roller Ball","description":""}]}]}"#;

    #[test]
    fn similar_merges_into_existing_category_without_cycle() {
        let (graph, category, idea) = lemon_graph();
        let provider = MockProvider::default().with_fixture(OpKind::FindSimilar, "Lemon Spray", SIMILAR);
        let request = ExecuteRequest {
            op: OpKind::FindSimilar,
            focus: idea,
            question: None,
        };
        let (batch, exchange) = execute(
            request,
            &graph,
            &PinSet::new(),
            &provider,
            &OrchestratorConfig::default(),
            stamp(2),
            None,
        )
        .unwrap();
        assert_eq!(exchange.attempts, 1);
        let names: Vec<&str> = batch.nodes.iter().map(|n| n.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "Targeted Application",
                "Natural Acids",
                "Vinegar Rinse Spray",
                "Targeted Stain Treatment",
                "Pen-Style Concentrate Applicator",
                "Stain Spot Roller Ball"
            ]
        );
        assert!(!batch
            .edges
            .iter()
            .any(|e| e.target == category && e.kind == EdgeKind::Inspires));
        let next = graph.add_nodes(&batch).unwrap();
        assert!(next.check_invariants().is_empty());
    }

    #[test]
    fn retries_then_gives_up() {
        let (graph, _, idea) = lemon_graph();
        let provider = Scripted(vec!["garbage"], Default::default());
        let request = ExecuteRequest {
            op: OpKind::DiagnoseRisks,
            focus: idea,
            question: None,
        };
        let err = execute(
            request,
            &graph,
            &PinSet::new(),
            &provider,
            &OrchestratorConfig::default(),
            stamp(2),
            None,
        )
        .unwrap_err();
        let ExecuteError::Generation { exchange, .. } = err else {
            panic!("expected a generation error");
        };
        assert_eq!(exchange.attempts, 3);
        assert_eq!(exchange.raw_replies, ["garbage"; 3]);
        assert!(exchange.parsed.is_none());
    }

    #[test]
    fn repair_succeeds_on_second_attempt() {
        let (graph, _, idea) = lemon_graph();
        let provider = Scripted(
            vec![
                r#"{"risks": "none"}"#,
                r#"{"risks":[{"name":"limited cleaning","description":""},{"name":"stains","description":""}]}"#,
            ],
            Default::default(),
        );
        let request = ExecuteRequest {
            op: OpKind::DiagnoseRisks,
            focus: idea,
            question: None,
        };
        let (batch, exchange) = execute(
            request,
            &graph,
            &PinSet::new(),
            &provider,
            &OrchestratorConfig::default(),
            stamp(2),
            None,
        )
        .unwrap();
        assert_eq!(exchange.attempts, 2);
        assert_eq!(batch.nodes.len(), 2);
    }

    #[test]
    fn preconditions() {
        let (graph, category, idea) = lemon_graph();
        let provider = MockProvider::placeholders_only();
        let run = |op, focus, question| {
            execute(
                ExecuteRequest { op, focus, question },
                &graph,
                &PinSet::new(),
                &provider,
                &OrchestratorConfig::default(),
                stamp(2),
                None,
            )
        };
        assert!(matches!(
            run(OpKind::FindSimilar, category, None),
            Err(ExecuteError::Precondition(_))
        ));
        assert!(matches!(
            run(OpKind::MitigateRisk, idea, None),
            Err(ExecuteError::Precondition(_))
        ));
        assert!(matches!(
            run(OpKind::AnswerQuestion, idea, None),
            Err(ExecuteError::Precondition(_))
        ));
        assert!(matches!(
            run(OpKind::AnswerQuestion, idea, Some("  ")),
            Err(ExecuteError::Precondition(_))
        ));
        assert!(matches!(
            run(OpKind::DiagnoseRisks, idea, Some("why")),
            Err(ExecuteError::Precondition(_))
        ));
        assert!(matches!(
            run(OpKind::DiagnoseRisks, NodeId::from_u128(3), None),
            Err(ExecuteError::UnknownNode(_))
        ));
        assert!(run(OpKind::ExpandCategory, category, None).is_ok());
    }

    #[test]
    fn expand_must_name_the_focus() {
        let (graph, category, _) = lemon_graph();
        let wrong = r#"{"categories":[{"name":"Other","description":"","ideas":[{"name":"a","description":""},{"name":"b","description":""},{"name":"c","description":""}]}]}"#;
        let provider = Scripted(vec![wrong], Default::default());
        let request = ExecuteRequest {
            op: OpKind::ExpandCategory,
            focus: category,
            question: None,
        };
        let err = execute(
            request,
            &graph,
            &PinSet::new(),
            &provider,
            &OrchestratorConfig::default(),
            stamp(2),
            None,
        )
        .unwrap_err();
        assert!(
            matches!(err, ExecuteError::Generation { error: ParseError::Schema { ref path, .. }, .. } if path == "categories[0].name")
        );
    }

    #[test]
    fn answer_creates_question_and_answer() {
        let (graph, _, idea) = lemon_graph();
        let provider = Scripted(
            vec![r#"{"answer":"It mostly helps.\nDetails follow."}"#],
            Default::default(),
        );
        let request = ExecuteRequest {
            op: OpKind::AnswerQuestion,
            focus: idea,
            question: Some("Will leftover lemon interfere with detergent?"),
        };
        let (batch, _) = execute(
            request,
            &graph,
            &PinSet::new(),
            &provider,
            &OrchestratorConfig::default(),
            stamp(2),
            None,
        )
        .unwrap();
        assert_eq!(batch.nodes[0].kind, NodeKind::Question);
        assert_eq!(batch.nodes[0].provenance, Provenance::User);
        assert_eq!(batch.nodes[0].name, "Will leftover lemon interfere with detergent?");
        assert_eq!(batch.nodes[1].kind, NodeKind::Answer);
        assert_eq!(batch.nodes[1].name, "It mostly helps.");
        assert_eq!(batch.nodes[1].provenance, Provenance::System);
        graph.add_nodes(&batch).unwrap();
    }

    #[test]
    fn cancellation_stops_retries() {
        let (graph, _, idea) = lemon_graph();
        let cancel = CancelToken::new();
        cancel.cancel();
        let provider = crate::orchestrator::CountingProvider::new(MockProvider::placeholders_only());
        let request = ExecuteRequest {
            op: OpKind::DiagnoseRisks,
            focus: idea,
            question: None,
        };
        let err = execute(
            request,
            &graph,
            &PinSet::new(),
            &provider,
            &OrchestratorConfig::default(),
            stamp(2),
            Some(&cancel),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ExecuteError::Provider {
                error: ProviderError::Cancelled,
                ..
            }
        ));
        assert_eq!(provider.calls(), 1);
    }
}
