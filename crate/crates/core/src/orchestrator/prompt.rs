//! Prompt templates, one per [`OpKind`].

use thiserror::Error;

use super::context::{render_context, SteeringContext};
use super::reply::ParseError;
use super::OpKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("{0} needs a question")]
    MissingQuestion(OpKind),
    #[error("{0} does not take a question")]
    UnexpectedQuestion(OpKind),
}

const ROLE: &str = "You are an ideation partner helping a person explore the design space of a creative \
problem. You only speak when asked. Ground every suggestion in the context below. Anything listed as \
the user's own ideas was written by the user: treat it as direction to honor and build on, and do not \
repeat it back as a new suggestion.";

fn instruction(op: OpKind, context: &SteeringContext) -> String {
    let focus = &context.focus().name;
    match op {
        OpKind::InitializeSpace => format!(
            "Elicit diverse idea categories for the task \"{}\". Propose between 4 and 6 distinct \
             categories of approaches, each accompanied by between 3 and 5 concrete example ideas. Cover \
             genuinely different directions rather than variations of one theme. Give every category and \
             idea a short name (at most 120 characters) and a one- or two-sentence description.",
            context.task_statement
        ),
        OpKind::ExpandCategory => format!(
            "Explore the idea category \"{focus}\" further. Propose between 3 and 5 new concrete ideas that \
             belong to this category and differ from the ideas already known. Return exactly one category \
             whose name is exactly \"{focus}\"."
        ),
        OpKind::FindSimilar => format!(
            "Find ideas similar to \"{focus}\" in two stages. First, abstract the idea's essential \
             attributes: between 2 and 4 underlying concepts that make it work, each with a short \
             rationale. Second, for those attributes, propose between 2 and 4 idea categories that \
             implement them in different ways. Each category names the attribute it comes from \
             (copy the attribute name exactly) and holds between 2 and 4 concrete ideas. Balance \
             conceptual relevance to \"{focus}\" with variety. Reusing the name of an existing category \
             is fine when it fits."
        ),
        OpKind::DiagnoseRisks => format!(
            "Diagnose \"{focus}\". List between 2 and 5 potential drawbacks or risks that would help the \
             user judge whether to pivot, iterate, or double down. Name each risk briefly and describe \
             why it matters."
        ),
        OpKind::MitigateRisk => {
            let subject = context
                .focus_parent()
                .map(|p| format!(" of \"{}\"", p.name))
                .unwrap_or_default();
            format!(
                "Suggest between 2 and 4 ways to mitigate the risk \"{focus}\"{subject}. Each mitigation \
                 should be a concrete change or workaround, not a restatement of the risk."
            )
        }
        OpKind::AnswerQuestion => format!(
            "Answer the user's question about \"{focus}\" concisely, in plain prose of at most 1200 \
             characters, using the context above."
        ),
    }
}

fn format_instruction(op: OpKind) -> &'static str {
    match op {
        OpKind::InitializeSpace | OpKind::ExpandCategory => {
            r#"{"categories": [{"name": "...", "description": "...", "ideas": [{"name": "...", "description": "..."}]}]}"#
        }
        OpKind::FindSimilar => {
            r#"{"attributes": [{"name": "...", "rationale": "..."}], "categories": [{"name": "...", "description": "...", "from_attribute": "...", "ideas": [{"name": "...", "description": "..."}]}]}"#
        }
        OpKind::DiagnoseRisks => r#"{"risks": [{"name": "...", "description": "..."}]}"#,
        OpKind::MitigateRisk => r#"{"mitigations": [{"name": "...", "description": "..."}]}"#,
        OpKind::AnswerQuestion => r#"{"answer": "..."}"#,
    }
}

/// Renders the full prompt for `op`. Identical inputs give identical bytes.
pub fn render_prompt(op: OpKind, context: &SteeringContext) -> Result<String, PromptError> {
    match (op.takes_question(), context.question_text.is_some()) {
        (true, false) => return Err(PromptError::MissingQuestion(op)),
        (false, true) => return Err(PromptError::UnexpectedQuestion(op)),
        _ => {}
    }
    Ok(format!(
        "{ROLE}\n\n{}\n\n{}\n\nReply with a single JSON document and nothing else, shaped exactly like:\n{}",
        render_context(context),
        instruction(op, context),
        format_instruction(op),
    ))
}

/// The prompt for a retry after `error`: the original prompt plus what went wrong.
pub fn render_repair_prompt(prompt: &str, error: &ParseError) -> String {
    format!(
        "{prompt}\n\nYour previous reply could not be used (at `{}`): {error}. Reply again with only the \
         JSON document in the required shape.",
        error.path()
    )
}
