//! Design-space graph: typed nodes, typed edges, and the structural rules
//! every session graph obeys.
//!
//! Graphs are values. [`DesignGraph::add_nodes`] returns a new graph and never
//! touches existing content, so a session's history is just a sequence of
//! graphs that only ever grow.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Maximum length of a node name, in characters.
pub const MAX_NAME_CHARS: usize = 120;

/// Maximum length of a task statement, which is also the Task node's name.
pub const MAX_TASK_CHARS: usize = 500;

/// Position of an event within a session log.
pub type EventSeq = u64;

macro_rules! hex_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(u128);

        impl $name {
            pub fn random() -> Self {
                Self(rand::random())
            }

            pub const fn from_u128(raw: u128) -> Self {
                Self(raw)
            }

            pub const fn as_u128(self) -> u128 {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:032x}", self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let valid = s.len() == 32
                    && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
                if !valid {
                    return Err(IdParseError(s.to_string()));
                }
                u128::from_str_radix(s, 16)
                    .map(Self)
                    .map_err(|_| IdParseError(s.to_string()))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

hex_id!(
    /// Identifier of a node, unique within its session. Rendered as 32 lowercase hex digits.
    NodeId
);
hex_id!(
    /// Identifier of a session. Rendered as 32 lowercase hex digits.
    SessionId
);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid identifier {0:?}: expected 32 lowercase hex digits")]
pub struct IdParseError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Task,
    Category,
    Idea,
    Attribute,
    Risk,
    Mitigation,
    Question,
    Answer,
}

impl NodeKind {
    pub const ALL: [NodeKind; 8] = [
        NodeKind::Task,
        NodeKind::Category,
        NodeKind::Idea,
        NodeKind::Attribute,
        NodeKind::Risk,
        NodeKind::Mitigation,
        NodeKind::Question,
        NodeKind::Answer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Task => "Task",
            NodeKind::Category => "Category",
            NodeKind::Idea => "Idea",
            NodeKind::Attribute => "Attribute",
            NodeKind::Risk => "Risk",
            NodeKind::Mitigation => "Mitigation",
            NodeKind::Question => "Question",
            NodeKind::Answer => "Answer",
        }
    }

    /// Only ideas and mitigations can be collected.
    pub fn is_pinnable(self) -> bool {
        matches!(self, NodeKind::Idea | NodeKind::Mitigation)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown node kind {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdeationNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub name: String,
    pub description: String,
    pub provenance: Provenance,
    pub created_at: DateTime<Utc>,
    pub created_by_event: EventSeq,
}

impl IdeationNode {
    /// Builds a node with a fresh random id.
    pub fn new(
        kind: NodeKind,
        name: impl Into<String>,
        description: impl Into<String>,
        provenance: Provenance,
        created_at: DateTime<Utc>,
        created_by_event: EventSeq,
    ) -> Self {
        Self {
            id: NodeId::random(),
            kind,
            name: name.into(),
            description: description.into(),
            provenance,
            created_at,
            created_by_event,
        }
    }

    pub fn normalized_name(&self) -> String {
        normalize_name(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    Contains,
    Abstracts,
    Inspires,
    FlagsRisk,
    Mitigates,
    Asks,
    Answers,
}

impl EdgeKind {
    /// Whether an edge of this kind may connect a `source` node to a `target` node.
    pub fn allows(self, source: NodeKind, target: NodeKind) -> bool {
        use NodeKind::*;
        match self {
            EdgeKind::Contains => {
                matches!((source, target), (Task, Category) | (Category, Idea))
            }
            EdgeKind::Abstracts => source == Idea && target == Attribute,
            EdgeKind::Inspires => source == Attribute && target == Category,
            EdgeKind::FlagsRisk => source == Idea && target == Risk,
            EdgeKind::Mitigates => source == Risk && target == Mitigation,
            EdgeKind::Asks => !matches!(source, Question | Answer) && target == Question,
            EdgeKind::Answers => source == Question && target == Answer,
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub source: NodeId,
    pub kind: EdgeKind,
    pub target: NodeId,
}

impl Edge {
    pub fn new(source: NodeId, kind: EdgeKind, target: NodeId) -> Self {
        Self { source, kind, target }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -{}-> {}", self.source, self.kind, self.target)
    }
}

/// Lowercases and collapses runs of whitespace into single spaces.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reasons a name cannot be used for a node, if any.
pub fn name_problem(name: &str) -> Option<&'static str> {
    if name.trim().is_empty() {
        Some("name is empty")
    } else if name.chars().count() > MAX_NAME_CHARS {
        Some("name exceeds 120 characters")
    } else {
        None
    }
}

/// Like [`name_problem`], except that a Task's name is its task statement.
pub fn node_name_problem(kind: NodeKind, name: &str) -> Option<&'static str> {
    if kind != NodeKind::Task {
        return name_problem(name);
    }
    if name.trim().is_empty() {
        Some("task statement is empty")
    } else if name.chars().count() > MAX_TASK_CHARS {
        Some("task statement exceeds 500 characters")
    } else {
        None
    }
}

/// A set of new nodes plus the edges that attach them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeBatch {
    pub nodes: Vec<IdeationNode>,
    pub edges: Vec<Edge>,
}

impl NodeBatch {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty()
    }

    pub fn push(&mut self, node: IdeationNode, incoming: impl IntoIterator<Item = (NodeId, EdgeKind)>) {
        let target = node.id;
        self.edges.extend(
            incoming
                .into_iter()
                .map(|(source, kind)| Edge::new(source, kind, target)),
        );
        self.nodes.push(node);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge {0} would close a cycle")]
    Cycle(Edge),
    #[error("edge kind {kind} cannot connect {source_kind} to {target_kind}")]
    EdgeKind {
        kind: EdgeKind,
        source_kind: NodeKind,
        target_kind: NodeKind,
    },
    #[error("name {normalized:?} is already used in this scope")]
    DuplicateName { normalized: String },
    #[error("edge {0} references a node that does not exist")]
    DanglingEdge(Edge),
    #[error("edge {0} already exists")]
    DuplicateEdge(Edge),
    #[error("node id {0} is already in use")]
    DuplicateId(NodeId),
    #[error("node {0} has no incoming edge")]
    Orphan(NodeId),
    #[error("node {id} is invalid: {reason}")]
    InvalidNode { id: NodeId, reason: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// Which structural rule a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    RootKind,
    SingleTask,
    NodeName,
    DanglingEdge,
    EdgeKind,
    RootHasParent,
    Orphan,
    Cycle,
    DuplicateName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub nodes: Vec<NodeId>,
    pub detail: String,
}

/// The per-session design space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignGraph {
    root: NodeId,
    nodes: IndexMap<NodeId, IdeationNode>,
    edges: IndexSet<Edge>,
}

impl DesignGraph {
    /// Starts a graph from its Task root.
    pub fn new(root: IdeationNode) -> Result<Self, GraphError> {
        if root.kind != NodeKind::Task {
            return Err(GraphError::InvalidNode {
                id: root.id,
                reason: format!("root must be a Task, not {}", root.kind),
            });
        }
        if let Some(reason) = node_name_problem(root.kind, &root.name) {
            return Err(GraphError::InvalidNode {
                id: root.id,
                reason: reason.to_string(),
            });
        }
        let id = root.id;
        Ok(Self {
            root: id,
            nodes: IndexMap::from([(id, root)]),
            edges: IndexSet::new(),
        })
    }

    /// Assembles a graph without any checks. Pair with [`check_invariants`](Self::check_invariants).
    pub fn from_parts_unchecked(
        root: NodeId,
        nodes: impl IntoIterator<Item = IdeationNode>,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Self {
        Self {
            root,
            nodes: nodes.into_iter().map(|n| (n.id, n)).collect(),
            edges: edges.into_iter().collect(),
        }
    }

    pub fn root(&self) -> &IdeationNode {
        &self.nodes[&self.root]
    }

    pub fn root_id(&self) -> NodeId {
        self.root
    }

    pub fn task_statement(&self) -> &str {
        &self.root().name
    }

    pub fn node(&self, id: NodeId) -> Option<&IdeationNode> {
        self.nodes.get(&id)
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn contains_edge(&self, edge: &Edge) -> bool {
        self.edges.contains(edge)
    }

    /// Nodes in insertion order.
    pub fn nodes(&self) -> impl Iterator<Item = &IdeationNode> {
        self.nodes.values()
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn count_kind(&self, kind: NodeKind) -> usize {
        self.nodes.values().filter(|n| n.kind == kind).count()
    }

    pub fn incoming(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.target == id)
    }

    pub fn outgoing(&self, id: NodeId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.source == id)
    }

    /// Children reached through `kind` edges, in edge order.
    pub fn children(&self, id: NodeId, kind: EdgeKind) -> impl Iterator<Item = &IdeationNode> {
        self.outgoing(id)
            .filter(move |e| e.kind == kind)
            .filter_map(|e| self.nodes.get(&e.target))
    }

    /// Category whose normalized name equals `normalize_name(name)`.
    pub fn find_category(&self, name: &str) -> Option<&IdeationNode> {
        let wanted = normalize_name(name);
        self.nodes
            .values()
            .find(|n| n.kind == NodeKind::Category && n.normalized_name() == wanted)
    }

    /// All nodes whose normalized name equals `normalize_name(name)`.
    pub fn find_by_name(&self, name: &str) -> Vec<&IdeationNode> {
        let wanted = normalize_name(name);
        self.nodes.values().filter(|n| n.normalized_name() == wanted).collect()
    }

    /// Whether `ancestor` reaches `node` along directed edges (a node reaches itself).
    pub fn reaches(&self, ancestor: NodeId, node: NodeId) -> bool {
        let mut seen = HashSet::new();
        let mut stack = vec![ancestor];
        while let Some(current) = stack.pop() {
            if current == node {
                return true;
            }
            if seen.insert(current) {
                stack.extend(self.outgoing(current).map(|e| e.target));
            }
        }
        false
    }

    /// Returns a new graph holding everything in `self` plus `batch`.
    ///
    /// Batch edges may point at existing nodes (merging into an existing
    /// category), but every new node needs at least one incoming edge.
    pub fn add_nodes(&self, batch: &NodeBatch) -> Result<DesignGraph, GraphError> {
        if batch.is_empty() {
            return Ok(self.clone());
        }
        let mut next = self.clone();

        for node in &batch.nodes {
            if next.nodes.contains_key(&node.id) {
                return Err(GraphError::DuplicateId(node.id));
            }
            if node.kind == NodeKind::Task {
                return Err(GraphError::InvalidNode {
                    id: node.id,
                    reason: "a session has exactly one Task".into(),
                });
            }
            if let Some(reason) = name_problem(&node.name) {
                return Err(GraphError::InvalidNode {
                    id: node.id,
                    reason: reason.into(),
                });
            }
            next.nodes.insert(node.id, node.clone());
        }

        for edge in &batch.edges {
            let (Some(source), Some(target)) = (next.nodes.get(&edge.source), next.nodes.get(&edge.target)) else {
                return Err(GraphError::DanglingEdge(*edge));
            };
            if !edge.kind.allows(source.kind, target.kind) {
                return Err(GraphError::EdgeKind {
                    kind: edge.kind,
                    source_kind: source.kind,
                    target_kind: target.kind,
                });
            }
            if !next.edges.insert(*edge) {
                return Err(GraphError::DuplicateEdge(*edge));
            }
        }

        for node in &batch.nodes {
            if !batch.edges.iter().any(|e| e.target == node.id) {
                return Err(GraphError::Orphan(node.id));
            }
        }

        for node in batch.nodes.iter().filter(|n| n.kind == NodeKind::Category) {
            let normalized = node.normalized_name();
            let clash = next.nodes.values().any(|other| {
                other.id != node.id && other.kind == NodeKind::Category && other.normalized_name() == normalized
            });
            if clash {
                return Err(GraphError::DuplicateName { normalized });
            }
        }
        for edge in batch.edges.iter().filter(|e| e.kind == EdgeKind::Contains) {
            if next.nodes[&edge.target].kind != NodeKind::Idea {
                continue;
            }
            let normalized = next.nodes[&edge.target].normalized_name();
            let clash = next
                .children(edge.source, EdgeKind::Contains)
                .any(|other| other.id != edge.target && other.normalized_name() == normalized);
            if clash {
                return Err(GraphError::DuplicateName { normalized });
            }
        }

        if let Some(edge) = batch.edges.iter().find(|e| next.reaches(e.target, e.source)) {
            return Err(GraphError::Cycle(*edge));
        }

        Ok(next)
    }

    /// Lists every broken structural rule; empty iff the graph is well formed.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let violation = |rule, nodes: Vec<NodeId>, detail: String| Violation { rule, nodes, detail };

        match self.nodes.get(&self.root) {
            Some(root) if root.kind == NodeKind::Task => {}
            _ => out.push(violation(
                Rule::RootKind,
                vec![self.root],
                "root is missing or is not a Task".into(),
            )),
        }
        let tasks: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.kind == NodeKind::Task)
            .map(|n| n.id)
            .collect();
        if tasks.len() != 1 {
            out.push(violation(
                Rule::SingleTask,
                tasks.clone(),
                format!("expected exactly one Task, found {}", tasks.len()),
            ));
        }
        for node in self.nodes.values() {
            if let Some(reason) = node_name_problem(node.kind, &node.name) {
                out.push(violation(Rule::NodeName, vec![node.id], reason.into()));
            }
        }

        let mut has_parent = HashSet::new();
        for edge in &self.edges {
            let (Some(source), Some(target)) = (self.nodes.get(&edge.source), self.nodes.get(&edge.target)) else {
                out.push(violation(
                    Rule::DanglingEdge,
                    vec![edge.source, edge.target],
                    format!("edge {edge} has a missing endpoint"),
                ));
                continue;
            };
            if !edge.kind.allows(source.kind, target.kind) {
                out.push(violation(
                    Rule::EdgeKind,
                    vec![edge.source, edge.target],
                    format!("{} cannot connect {} to {}", edge.kind, source.kind, target.kind),
                ));
            }
            has_parent.insert(edge.target);
        }
        for node in self.nodes.values() {
            if node.id == self.root {
                if has_parent.contains(&node.id) {
                    out.push(violation(
                        Rule::RootHasParent,
                        vec![node.id],
                        "root has an incoming edge".into(),
                    ));
                }
            } else if !has_parent.contains(&node.id) {
                out.push(violation(
                    Rule::Orphan,
                    vec![node.id],
                    format!("{} {:?} has no incoming edge", node.kind, node.name),
                ));
            }
        }

        let cyclic = self.cyclic_nodes();
        if !cyclic.is_empty() {
            out.push(violation(Rule::Cycle, cyclic, "graph contains a directed cycle".into()));
        }

        let mut categories: HashMap<String, Vec<NodeId>> = HashMap::new();
        for node in self.nodes.values().filter(|n| n.kind == NodeKind::Category) {
            categories.entry(node.normalized_name()).or_default().push(node.id);
        }
        for (name, ids) in categories.into_iter().filter(|(_, ids)| ids.len() > 1) {
            out.push(violation(
                Rule::DuplicateName,
                ids,
                format!("category name {name:?} repeats"),
            ));
        }
        for category in self.nodes.values().filter(|n| n.kind == NodeKind::Category) {
            let mut ideas: HashMap<String, Vec<NodeId>> = HashMap::new();
            for idea in self
                .children(category.id, EdgeKind::Contains)
                .filter(|n| n.kind == NodeKind::Idea)
            {
                ideas.entry(idea.normalized_name()).or_default().push(idea.id);
            }
            for (name, ids) in ideas.into_iter().filter(|(_, ids)| ids.len() > 1) {
                out.push(violation(
                    Rule::DuplicateName,
                    ids,
                    format!("idea name {name:?} repeats in category {:?}", category.name),
                ));
            }
        }
        out
    }

    /// Nodes that cannot be topologically ordered (Kahn's algorithm leftovers).
    fn cyclic_nodes(&self) -> Vec<NodeId> {
        let mut indegree: HashMap<NodeId, usize> = self.nodes.keys().map(|id| (*id, 0)).collect();
        for edge in &self.edges {
            if let Some(d) = indegree.get_mut(&edge.target) {
                if self.nodes.contains_key(&edge.source) {
                    *d += 1;
                }
            }
        }
        let mut queue: VecDeque<NodeId> = indegree.iter().filter(|(_, d)| **d == 0).map(|(id, _)| *id).collect();
        while let Some(id) = queue.pop_front() {
            for edge in self.outgoing(id) {
                if let Some(d) = indegree.get_mut(&edge.target) {
                    *d -= 1;
                    if *d == 0 {
                        queue.push_back(edge.target);
                    }
                }
            }
        }
        let mut left: Vec<NodeId> = indegree.into_iter().filter(|(_, d)| *d > 0).map(|(id, _)| id).collect();
        left.sort();
        left
    }

    /// The root-to-node path, taking the oldest parent at every fork.
    ///
    /// "Oldest" is the parent with the smallest `created_by_event`; ties go to
    /// the parent whose edge was added first.
    pub fn subpath_to_root(&self, node: NodeId) -> Result<Vec<&IdeationNode>, GraphError> {
        let mut current = self.nodes.get(&node).ok_or(GraphError::UnknownNode(node))?;
        let mut path = vec![current];
        let mut seen = HashSet::from([current.id]);
        while current.id != self.root {
            let parent = self
                .incoming(current.id)
                .filter_map(|e| self.nodes.get(&e.source))
                .min_by_key(|p| p.created_by_event);
            match parent {
                Some(p) if seen.insert(p.id) => {
                    path.push(p);
                    current = p;
                }
                _ => break,
            }
        }
        path.reverse();
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PinError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("{kind} nodes cannot be pinned")]
    NotPinnable { id: NodeId, kind: NodeKind },
    #[error("node {0} is already pinned")]
    AlreadyPinned(NodeId),
    #[error("node {0} is not pinned")]
    NotPinned(NodeId),
}

/// Collected nodes, in the order they were pinned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PinSet {
    pinned: IndexSet<NodeId>,
}

impl PinSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check_pin(&self, graph: &DesignGraph, id: NodeId) -> Result<(), PinError> {
        let node = graph.node(id).ok_or(PinError::UnknownNode(id))?;
        if !node.kind.is_pinnable() {
            return Err(PinError::NotPinnable { id, kind: node.kind });
        }
        if self.pinned.contains(&id) {
            return Err(PinError::AlreadyPinned(id));
        }
        Ok(())
    }

    pub fn pin(&mut self, graph: &DesignGraph, id: NodeId) -> Result<(), PinError> {
        self.check_pin(graph, id)?;
        self.pinned.insert(id);
        Ok(())
    }

    pub fn unpin(&mut self, id: NodeId) -> Result<(), PinError> {
        if self.pinned.shift_remove(&id) {
            Ok(())
        } else {
            Err(PinError::NotPinned(id))
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.pinned.contains(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.pinned.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.pinned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty()
    }
}

/// One row of the explored-canvas summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryEntry {
    pub node: IdeationNode,
    /// Names from the task root down to the node itself.
    pub path: Vec<String>,
}

/// Pinned nodes in pin order, each with its display path.
pub fn explored_summary(graph: &DesignGraph, pins: &PinSet) -> Vec<SummaryEntry> {
    pins.iter()
        .filter_map(|id| {
            let path = graph.subpath_to_root(id).ok()?;
            Some(SummaryEntry {
                node: graph.node(id)?.clone(),
                path: path.iter().map(|n| n.name.clone()).collect(),
            })
        })
        .collect()
}
