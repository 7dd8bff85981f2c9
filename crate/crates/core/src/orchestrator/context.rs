use serde::Serialize;

use crate::graph::{DesignGraph, GraphError, NodeId, NodeKind, PinSet, Provenance};

/// Upper bound on [`render_context`] output, in characters.
pub const CONTEXT_BUDGET_CHARS: usize = 12_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathEntry {
    pub kind: NodeKind,
    pub name: String,
    pub description: String,
}

/// A user-authored node, as shown to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Contribution {
    pub kind: NodeKind,
    pub name: String,
    pub description: String,
}

/// Everything the model is told about the session for one generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SteeringContext {
    pub task_statement: String,
    pub focus_path: Vec<PathEntry>,
    /// Oldest first.
    pub user_contributions: Vec<Contribution>,
    pub pinned_names: Vec<String>,
    pub question_text: Option<String>,
}

impl SteeringContext {
    /// The node the operation targets.
    pub fn focus(&self) -> &PathEntry {
        self.focus_path.last().expect("focus path always holds the root")
    }

    /// The node just above the focus, if any.
    pub fn focus_parent(&self) -> Option<&PathEntry> {
        self.focus_path.len().checked_sub(2).map(|i| &self.focus_path[i])
    }
}

/// Gathers the steering context for an operation on `focus`.
///
/// Oldest user contributions are evicted first, then oldest pins, until the
/// rendered context fits [`CONTEXT_BUDGET_CHARS`]. The task and focus path are
/// always kept.
pub fn assemble_context(
    graph: &DesignGraph,
    pins: &PinSet,
    focus: NodeId,
    question: Option<&str>,
) -> Result<SteeringContext, GraphError> {
    let focus_path = graph
        .subpath_to_root(focus)?
        .into_iter()
        .map(|n| PathEntry {
            kind: n.kind,
            name: n.name.clone(),
            description: n.description.clone(),
        })
        .collect();
    let user_contributions = graph
        .nodes()
        .filter(|n| n.provenance == Provenance::User && n.kind != NodeKind::Task)
        .map(|n| Contribution {
            kind: n.kind,
            name: n.name.clone(),
            description: n.description.clone(),
        })
        .collect();
    let pinned_names = pins
        .iter()
        .filter_map(|id| graph.node(id))
        .map(|n| n.name.clone())
        .collect();

    let mut context = SteeringContext {
        task_statement: graph.task_statement().to_string(),
        focus_path,
        user_contributions,
        pinned_names,
        question_text: question.map(str::to_string),
    };
    fit_budget(&mut context);
    Ok(context)
}

fn fit_budget(context: &mut SteeringContext) {
    let mut size = rendered_len(context);

    let mut evicted = 0;
    while size > CONTEXT_BUDGET_CHARS && evicted < context.user_contributions.len() {
        size -= contribution_line(&context.user_contributions[evicted]).chars().count() + 1;
        evicted += 1;
    }
    context.user_contributions.drain(..evicted);
    // An emptied section also loses its header.
    size = rendered_len(context);

    let mut evicted = 0;
    while size > CONTEXT_BUDGET_CHARS && evicted < context.pinned_names.len() {
        size -= pin_line(&context.pinned_names[evicted]).chars().count() + 1;
        evicted += 1;
    }
    context.pinned_names.drain(..evicted);
}

fn rendered_len(context: &SteeringContext) -> usize {
    render_context(context).chars().count()
}

fn entry_line(kind: NodeKind, name: &str, description: &str) -> String {
    if description.trim().is_empty() {
        format!("- {kind} \"{name}\"")
    } else {
        format!("- {kind} \"{name}\": {description}")
    }
}

fn contribution_line(c: &Contribution) -> String {
    entry_line(c.kind, &c.name, &c.description)
}

fn pin_line(name: &str) -> String {
    format!("- \"{name}\"")
}

/// Renders the context block embedded in every prompt.
///
/// Sections are separated by a blank line and omitted when empty. Each list
/// entry sits on its own line, so dropping an entry shrinks the output by
/// exactly that line plus its newline.
pub fn render_context(context: &SteeringContext) -> String {
    let mut sections = vec![format!("Task: {}", context.task_statement)];

    let mut focus = String::from("Current focus (from the task down to the selected item):");
    for entry in &context.focus_path {
        focus.push('\n');
        focus.push_str(&entry_line(entry.kind, &entry.name, &entry.description));
    }
    sections.push(focus);

    if !context.user_contributions.is_empty() {
        let mut own = String::from("The user's own ideas (written by the user; honor them and build on them):");
        for c in &context.user_contributions {
            own.push('\n');
            own.push_str(&contribution_line(c));
        }
        sections.push(own);
    }

    if !context.pinned_names.is_empty() {
        let mut pinned = String::from("Ideas the user has collected:");
        for name in &context.pinned_names {
            pinned.push('\n');
            pinned.push_str(&pin_line(name));
        }
        sections.push(pinned);
    }

    if let Some(question) = &context.question_text {
        sections.push(format!("The user's question:\n{question}"));
    }

    sections.join("\n\n")
}
