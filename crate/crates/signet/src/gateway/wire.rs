//! Wire-level request/response bodies and the typed results the gateway
//! hands to callers.

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One detected entity mention. Offsets are half-open character offsets
/// into the source text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentionResult {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub score: f64,
}

/// Zero-shot classification outcome: candidate labels ordered by
/// descending score, ties broken by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZscResult {
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
}

impl ZscResult {
    pub fn top(&self) -> (&str, f64) {
        (self.labels[0].as_str(), self.scores[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResult {
    pub text: String,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }
}

// -- request bodies ---------------------------------------------------------

pub(crate) fn ner_request(text: &str) -> Value {
    serde_json::json!({ "text": text })
}

pub(crate) fn zsc_request(
    premise: &str,
    hypothesis_template: &str,
    candidate_labels: &[String],
    multi_label: bool,
) -> Value {
    serde_json::json!({
        "premise": premise,
        "hypothesis_template": hypothesis_template,
        "candidate_labels": candidate_labels,
        "multi_label": multi_label,
    })
}

pub(crate) fn llm_request(model: &str, messages: &[ChatMessage]) -> Value {
    serde_json::json!({ "model": model, "messages": messages })
}

// -- response bodies --------------------------------------------------------

#[derive(Deserialize)]
pub(crate) struct NerResponse {
    pub mentions: Vec<WireMention>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct WireMention {
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub score: f64,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ZscResponse {
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct LlmResponse {
    pub text: String,
    pub model: String,
}
