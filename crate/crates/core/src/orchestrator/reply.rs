//! Structured replies: extraction from free text, schema validation, bounds.

use std::ops::RangeInclusive;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::OpKind;
use crate::graph::{name_problem, normalize_name};

/// Answers longer than this are cut at parse time.
pub const MAX_ANSWER_CHARS: usize = 1_200;

/// How many leading `{` positions are tried when hunting for a document in prose.
const MAX_SCAN_STARTS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ItemDraft {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoryDraft {
    pub name: String,
    pub description: String,
    pub ideas: Vec<ItemDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeDraft {
    pub name: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimilarCategoryDraft {
    pub name: String,
    pub description: String,
    pub from_attribute: String,
    pub ideas: Vec<ItemDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategoriesReply {
    pub categories: Vec<CategoryDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimilarReply {
    pub attributes: Vec<AttributeDraft>,
    pub categories: Vec<SimilarCategoryDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RisksReply {
    pub risks: Vec<ItemDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MitigationsReply {
    pub mitigations: Vec<ItemDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnswerReply {
    pub answer: String,
    /// Set when the reply exceeded [`MAX_ANSWER_CHARS`] and was cut.
    #[serde(skip)]
    pub truncated: bool,
}

/// A validated reply. Serializes back to the wire shape it was parsed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum ReplyPayload {
    Categories(CategoriesReply),
    Similar(SimilarReply),
    Risks(RisksReply),
    Mitigations(MitigationsReply),
    Answer(AnswerReply),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("reply holds no decodable JSON document: {message}")]
    Decode { message: String },
    #[error("reply does not match the schema at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("`{path}` has {actual} entries, expected {min} to {max}")]
    Bounds {
        path: String,
        min: usize,
        max: usize,
        actual: usize,
    },
}

impl ParseError {
    /// Where the problem is; `$` is the whole reply.
    pub fn path(&self) -> &str {
        match self {
            ParseError::Decode { .. } => "$",
            ParseError::Schema { path, .. } | ParseError::Bounds { path, .. } => path,
        }
    }

    pub fn class(&self) -> &'static str {
        match self {
            ParseError::Decode { .. } => "decode",
            ParseError::Schema { .. } => "schema",
            ParseError::Bounds { .. } => "bounds",
        }
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ParseError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}

struct Bounds {
    categories: RangeInclusive<usize>,
    ideas: RangeInclusive<usize>,
    attributes: RangeInclusive<usize>,
    items: RangeInclusive<usize>,
}

fn bounds(op: OpKind) -> Bounds {
    let none = 0..=0;
    match op {
        OpKind::InitializeSpace => Bounds {
            categories: 4..=6,
            ideas: 3..=5,
            attributes: none.clone(),
            items: none,
        },
        OpKind::ExpandCategory => Bounds {
            categories: 1..=1,
            ideas: 3..=5,
            attributes: none.clone(),
            items: none,
        },
        OpKind::FindSimilar => Bounds {
            categories: 2..=4,
            ideas: 2..=4,
            attributes: 2..=4,
            items: none,
        },
        OpKind::DiagnoseRisks => Bounds {
            categories: none.clone(),
            ideas: none.clone(),
            attributes: none,
            items: 2..=5,
        },
        OpKind::MitigateRisk => Bounds {
            categories: none.clone(),
            ideas: none.clone(),
            attributes: none,
            items: 2..=4,
        },
        OpKind::AnswerQuestion => Bounds {
            categories: none.clone(),
            ideas: none.clone(),
            attributes: none.clone(),
            items: none,
        },
    }
}

/// Extracts, decodes and validates the reply for `op`.
pub fn parse_reply(op: OpKind, raw: &str) -> Result<ReplyPayload, ParseError> {
    let document = extract_document(raw)?;
    let root = document
        .as_object()
        .ok_or_else(|| ParseError::schema("$", format!("expected an object, found {}", type_name(&document))))?;
    let b = bounds(op);
    Ok(match op {
        OpKind::InitializeSpace | OpKind::ExpandCategory => {
            let categories = list(root, "categories", "", &b.categories)?
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let path = format!("categories[{i}]");
                    let obj = object(v, &path)?;
                    Ok(CategoryDraft {
                        name: name(obj, &path)?,
                        description: text(obj, "description", &path)?,
                        ideas: items(obj, "ideas", &path, &b.ideas)?,
                    })
                })
                .collect::<Result<_, ParseError>>()?;
            ReplyPayload::Categories(CategoriesReply { categories })
        }
        OpKind::FindSimilar => {
            let attributes: Vec<AttributeDraft> = list(root, "attributes", "", &b.attributes)?
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let path = format!("attributes[{i}]");
                    let obj = object(v, &path)?;
                    Ok(AttributeDraft {
                        name: name(obj, &path)?,
                        rationale: text(obj, "rationale", &path)?,
                    })
                })
                .collect::<Result<_, ParseError>>()?;
            let known: Vec<String> = attributes.iter().map(|a| normalize_name(&a.name)).collect();
            let categories = list(root, "categories", "", &b.categories)?
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let path = format!("categories[{i}]");
                    let obj = object(v, &path)?;
                    let from_attribute = text(obj, "from_attribute", &path)?;
                    if !known.contains(&normalize_name(&from_attribute)) {
                        return Err(ParseError::schema(
                            format!("{path}.from_attribute"),
                            format!("{from_attribute:?} is not one of the listed attributes"),
                        ));
                    }
                    Ok(SimilarCategoryDraft {
                        name: name(obj, &path)?,
                        description: text(obj, "description", &path)?,
                        from_attribute,
                        ideas: items(obj, "ideas", &path, &b.ideas)?,
                    })
                })
                .collect::<Result<_, ParseError>>()?;
            ReplyPayload::Similar(SimilarReply { attributes, categories })
        }
        OpKind::DiagnoseRisks => ReplyPayload::Risks(RisksReply {
            risks: items(root, "risks", "", &b.items)?,
        }),
        OpKind::MitigateRisk => ReplyPayload::Mitigations(MitigationsReply {
            mitigations: items(root, "mitigations", "", &b.items)?,
        }),
        OpKind::AnswerQuestion => {
            let answer = text(root, "answer", "")?;
            if answer.is_empty() {
                return Err(ParseError::schema("answer", "answer is empty"));
            }
            let truncated = answer.chars().count() > MAX_ANSWER_CHARS;
            let answer = if truncated {
                answer
                    .chars()
                    .take(MAX_ANSWER_CHARS)
                    .collect::<String>()
                    .trim_end()
                    .to_string()
            } else {
                answer
            };
            ReplyPayload::Answer(AnswerReply { answer, truncated })
        }
    })
}

/// Finds the single JSON object a reply carries.
///
/// Tried in order: each fenced block holding an object, the whole trimmed text
/// if it is JSON at all, then the first object that decodes starting at some
/// `{`. Trailing prose is ignored.
fn extract_document(raw: &str) -> Result<Value, ParseError> {
    for block in fenced_blocks(raw) {
        if let Ok(value @ Value::Object(_)) = serde_json::from_str::<Value>(block.trim()) {
            return Ok(value);
        }
    }
    let trimmed = raw.trim();
    let whole = match serde_json::from_str::<Value>(trimmed) {
        // Well-formed JSON is the document even when it isn't an object;
        // validation says so rather than digging objects out of it.
        Ok(value) => return Ok(value),
        Err(err) => err,
    };
    for (start, _) in raw.match_indices('{').take(MAX_SCAN_STARTS) {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        if let Some(Ok(value @ Value::Object(_))) = stream.next() {
            return Ok(value);
        }
    }
    Err(ParseError::Decode {
        message: whole.to_string(),
    })
}

/// Contents of ``` fenced blocks, with any language tag removed.
fn fenced_blocks(raw: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(close) = after.find("```") else { break };
        let inner = &after[..close];
        // A language tag is whatever sits on the fence line before the first
        // newline, provided it contains no JSON.
        let body = match inner.find('\n') {
            Some(nl) if !inner[..nl].contains('{') => &inner[nl + 1..],
            _ => inner,
        };
        blocks.push(body);
        rest = &after[close + 3..];
    }
    blocks
}

fn type_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn join(parent: &str, field: &str) -> String {
    if parent.is_empty() {
        field.to_string()
    } else {
        format!("{parent}.{field}")
    }
}

fn object<'a>(value: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ParseError> {
    value
        .as_object()
        .ok_or_else(|| ParseError::schema(path, format!("expected an object, found {}", type_name(value))))
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, parent: &str) -> Result<&'a Value, ParseError> {
    obj.get(key)
        .ok_or_else(|| ParseError::schema(join(parent, key), "missing field"))
}

fn text(obj: &Map<String, Value>, key: &str, parent: &str) -> Result<String, ParseError> {
    let path = join(parent, key);
    match field(obj, key, parent)? {
        Value::String(s) => Ok(s.trim().to_string()),
        other => Err(ParseError::schema(
            path,
            format!("expected a string, found {}", type_name(other)),
        )),
    }
}

fn name(obj: &Map<String, Value>, parent: &str) -> Result<String, ParseError> {
    let value = text(obj, "name", parent)?;
    match name_problem(&value) {
        Some(problem) => Err(ParseError::schema(join(parent, "name"), problem)),
        None => Ok(value),
    }
}

fn list<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    parent: &str,
    bounds: &RangeInclusive<usize>,
) -> Result<&'a Vec<Value>, ParseError> {
    let path = join(parent, key);
    let values = match field(obj, key, parent)? {
        Value::Array(values) => values,
        other => {
            return Err(ParseError::schema(
                path,
                format!("expected an array, found {}", type_name(other)),
            ));
        }
    };
    if !bounds.contains(&values.len()) {
        return Err(ParseError::Bounds {
            path,
            min: *bounds.start(),
            max: *bounds.end(),
            actual: values.len(),
        });
    }
    Ok(values)
}

fn items(
    obj: &Map<String, Value>,
    key: &str,
    parent: &str,
    bounds: &RangeInclusive<usize>,
) -> Result<Vec<ItemDraft>, ParseError> {
    let base = join(parent, key);
    list(obj, key, parent, bounds)?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let path = format!("{base}[{i}]");
            let item = object(v, &path)?;
            Ok(ItemDraft {
                name: name(item, &path)?,
                description: text(item, "description", &path)?,
            })
        })
        .collect()
}
