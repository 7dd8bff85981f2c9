//! Offline provider backed by fixture files.

use std::collections::HashMap;
use std::fs;
use std::io::ErrorKind;
use std::path::PathBuf;

use serde_json::json;
use sha2::{Digest, Sha256};

use super::provider::{CompletionRequest, Provider, ProviderError};
use super::OpKind;
use crate::graph::normalize_name;

/// File name holding the reply for `op` invoked on a node called `seed`.
///
/// The format is `<opkind-lowercase>__<normalized-name>.txt`; path separators
/// in the name become underscores.
pub fn fixture_key(op: OpKind, seed: &str) -> String {
    let name: String = normalize_name(seed)
        .chars()
        .map(|c| if matches!(c, '/' | '\\' | '\0') { '_' } else { c })
        .collect();
    format!("{}__{}.txt", op.key(), name)
}

/// Deterministic provider: replies come from fixtures keyed by
/// [`fixture_key`], or from a hash of the op and seed when placeholders are on.
#[derive(Debug, Clone, Default)]
pub struct MockProvider {
    dir: Option<PathBuf>,
    inline: HashMap<String, String>,
    placeholders: bool,
}

impl MockProvider {
    /// Reads fixtures from `dir`.
    pub fn from_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    /// Only placeholder replies, no fixtures.
    pub fn placeholders_only() -> Self {
        Self {
            placeholders: true,
            ..Self::default()
        }
    }

    /// Falls back to hash-derived replies for unseeded keys.
    pub fn with_placeholders(mut self, enabled: bool) -> Self {
        self.placeholders = enabled;
        self
    }

    /// Adds an in-memory fixture; these shadow files with the same key.
    pub fn with_fixture(mut self, op: OpKind, seed: &str, reply: impl Into<String>) -> Self {
        self.inline.insert(fixture_key(op, seed), reply.into());
        self
    }

    fn lookup(&self, key: &str) -> Result<Option<String>, ProviderError> {
        if let Some(reply) = self.inline.get(key) {
            return Ok(Some(reply.clone()));
        }
        let Some(dir) = &self.dir else { return Ok(None) };
        match fs::read_to_string(dir.join(key)) {
            Ok(reply) => Ok(Some(reply)),
            Err(err) if err.kind() == ErrorKind::NotFound => Ok(None),
            Err(err) => Err(ProviderError::Transport(format!("reading fixture {key}: {err}"))),
        }
    }
}

impl Provider for MockProvider {
    fn id(&self) -> String {
        "mock".into()
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        if request.cancel.is_some_and(|c| c.is_cancelled()) {
            return Err(ProviderError::Cancelled);
        }
        let key = fixture_key(request.op, request.seed);
        if let Some(reply) = self.lookup(&key)? {
            return Ok(reply);
        }
        if self.placeholders {
            return Ok(placeholder_reply(request.op, request.seed, request.prompt));
        }
        Err(ProviderError::MissingFixture { key })
    }
}

/// A schema-valid reply derived only from a hash of its inputs.
fn placeholder_reply(op: OpKind, seed: &str, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(op.as_str().as_bytes());
    hasher.update([0]);
    hasher.update(seed.as_bytes());
    hasher.update([0]);
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    let tag = |i: usize| format!("{:02x}{:02x}", digest[(2 * i) % 32], digest[(2 * i + 1) % 32]);
    // Three digest-driven counts pick list lengths inside each op's bounds.
    let pick = |i: usize, lo: usize, hi: usize| lo + digest[20 + i] as usize % (hi - lo + 1);
    let short: String = seed.chars().take(60).collect();

    let item = |label: &str, i: usize| {
        json!({
            "name": format!("{label} {} {}", short, tag(i)),
            "description": format!("Placeholder {} for {short}.", label.to_lowercase()),
        })
    };
    let ideas = |cat: usize, n: usize| -> Vec<_> { (0..n).map(|j| item("Idea", cat * 8 + j)).collect() };

    let value = match op {
        OpKind::InitializeSpace => {
            let categories: Vec<_> = (0..pick(0, 4, 6))
                .map(|c| {
                    json!({
                        "name": format!("Direction {}", tag(c + 1)),
                        "description": format!("Placeholder direction for {short}."),
                        "ideas": ideas(c + 1, pick(1, 3, 5)),
                    })
                })
                .collect();
            json!({ "categories": categories })
        }
        OpKind::ExpandCategory => json!({
            "categories": [{
                "name": seed,
                "description": format!("More ideas for {short}."),
                "ideas": ideas(1, pick(0, 3, 5)),
            }]
        }),
        OpKind::FindSimilar => {
            let attributes: Vec<_> = (0..pick(0, 2, 4))
                .map(|a| {
                    json!({
                        "name": format!("Attribute {}", tag(a + 1)),
                        "rationale": format!("Placeholder attribute of {short}."),
                    })
                })
                .collect();
            let categories: Vec<_> = (0..pick(1, 2, 4))
                .map(|c| {
                    json!({
                        "name": format!("Variant {}", tag(c + 9)),
                        "description": format!("Placeholder variant of {short}."),
                        "from_attribute": attributes[c % attributes.len()]["name"],
                        "ideas": ideas(c + 2, pick(2, 2, 4)),
                    })
                })
                .collect();
            json!({ "attributes": attributes, "categories": categories })
        }
        OpKind::DiagnoseRisks => {
            let risks: Vec<_> = (0..pick(0, 2, 5)).map(|i| item("Risk", i)).collect();
            json!({ "risks": risks })
        }
        OpKind::MitigateRisk => {
            let mitigations: Vec<_> = (0..pick(0, 2, 4)).map(|i| item("Mitigation", i)).collect();
            json!({ "mitigations": mitigations })
        }
        OpKind::AnswerQuestion => json!({
            "answer": format!("Placeholder answer {} about {short}.", tag(0)),
        }),
    };
    value.to_string()
}
