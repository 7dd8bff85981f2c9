//! Turns one opt-in user action into provider round-trips and a node batch.
//!
//! The pipeline is: [`assemble_context`] from the session graph, then
//! [`render_prompt`] for the requested [`OpKind`], call a [`Provider`], then
//! [`parse_reply`] and map the payload onto new graph nodes. [`execute`] runs
//! the whole loop including repair retries.

mod context;
mod execute;
mod http;
mod mock;
mod prompt;
mod provider;
mod reply;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::NodeKind;

pub use context::{assemble_context, render_context, Contribution, PathEntry, SteeringContext, CONTEXT_BUDGET_CHARS};
pub use execute::{execute, ExecuteError, ExecuteRequest, ModelExchange, NodeStamp, OrchestratorConfig};
pub use http::{HttpProvider, HttpProviderConfig, API_KEY_ENV};
pub use mock::{fixture_key, MockProvider};
pub use prompt::{render_prompt, render_repair_prompt, PromptError};
pub use provider::{CancelToken, CompletionRequest, CountingProvider, GenerationParams, Provider, ProviderError};
pub use reply::{
    parse_reply, AnswerReply, AttributeDraft, CategoriesReply, CategoryDraft, ItemDraft, MitigationsReply, ParseError,
    ReplyPayload, RisksReply, SimilarCategoryDraft, SimilarReply, MAX_ANSWER_CHARS,
};

/// The six generation operations a user can invoke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    InitializeSpace,
    ExpandCategory,
    FindSimilar,
    DiagnoseRisks,
    MitigateRisk,
    AnswerQuestion,
}

impl OpKind {
    pub const ALL: [OpKind; 6] = [
        OpKind::InitializeSpace,
        OpKind::ExpandCategory,
        OpKind::FindSimilar,
        OpKind::DiagnoseRisks,
        OpKind::MitigateRisk,
        OpKind::AnswerQuestion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OpKind::InitializeSpace => "InitializeSpace",
            OpKind::ExpandCategory => "ExpandCategory",
            OpKind::FindSimilar => "FindSimilar",
            OpKind::DiagnoseRisks => "DiagnoseRisks",
            OpKind::MitigateRisk => "MitigateRisk",
            OpKind::AnswerQuestion => "AnswerQuestion",
        }
    }

    /// Lowercase form used in fixture file names.
    pub fn key(self) -> String {
        self.as_str().to_ascii_lowercase()
    }

    /// Whether the op may be invoked on a node of `kind`.
    pub fn accepts_focus(self, kind: NodeKind) -> bool {
        match self {
            OpKind::InitializeSpace => kind == NodeKind::Task,
            OpKind::ExpandCategory => kind == NodeKind::Category,
            OpKind::FindSimilar | OpKind::DiagnoseRisks => kind == NodeKind::Idea,
            OpKind::MitigateRisk => kind == NodeKind::Risk,
            // The Asks edge cannot start at a Question or an Answer.
            OpKind::AnswerQuestion => !matches!(kind, NodeKind::Question | NodeKind::Answer),
        }
    }

    pub fn takes_question(self) -> bool {
        self == OpKind::AnswerQuestion
    }

    /// Default sampling temperature.
    pub fn default_temperature(self) -> f64 {
        if self == OpKind::AnswerQuestion {
            0.2
        } else {
            0.9
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OpKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .into_iter()
            .find(|op| op.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown operation {s:?}"))
    }
}
