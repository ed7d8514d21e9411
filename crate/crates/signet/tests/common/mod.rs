//! Shared test support: a deterministic stand-in for the three live model
//! services, plus helpers for building configs over the shipped fixtures.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde_json::{json, Value};

use signet::gateway::{Transport, TransportError, TransportErrorKind, TransportRequest};
use signet::run::RunConfig;

pub const HEADLINE_1: &str = "Facebook Paid GOP Firm to Malign Tiktok";
pub const HEADLINE_2: &str = "Apple's Stunning $10 Billion Blow to Facebook";
pub const HEADLINE_3: &str = "Why Apple's Privacy Changes Hurt Snap and Facebook but Benefited Google";
pub const HEADLINE_4: &str = "Apple and Google compete against Facebook";

pub const STOCK_HEADLINE: &str = "MSFT shares climb 2% after earnings beat";

/// Recorded model explanations for the four golden headlines, one prose
/// segment per pair.
pub const EXPLANATION_1: &str = "Facebook and GOP Firm: The relationship appears to be positive from the context provided, as Facebook paid the GOP firm, indicating a transactional or business relationship.\nFacebook and TikTok: The relationship appears to be negative, as Facebook paid the GOP firm to \"malign\" TikTok, indicating a harmful intent towards TikTok.\nGOP Firm and TikTok: The relationship can also be interpreted as negative, as the GOP firm is paid to \"malign\" TikTok, suggesting they carried out actions intended to harm or discredit TikTok.";

pub const EXPLANATION_2: &str = "Apple and Facebook: The relationship appears to be negative, as the word \"blow\" suggests that Apple's action has led to a significant negative impact (a \"$10 billion blow\") to Facebook.";

pub const EXPLANATION_3: &str = "Apple and Snap: The relationship appears to be negative, as Apple's privacy changes are stated to have \"hurt\" Snap.\nApple and Facebook: The relationship appears to be negative, as Apple's privacy changes are also stated to have \"hurt\" Facebook.\nApple and Google: The relationship appears to be positive, as Google is stated to have \"benefited\" from Apple's privacy changes.";

pub const EXPLANATION_4: &str = "Apple and Facebook: The relationship appears to be negative, as Apple is mentioned as competing against Facebook.\nGoogle and Facebook: The relationship also appears to be negative, as Google is mentioned as competing against Facebook.\nApple and Google: The relationship between Apple and Google is not directly mentioned in the headline, so it would be classified as unknown based on the information provided.";

pub fn golden_explanations() -> [(&'static str, &'static str); 4] {
    [
        (HEADLINE_1, EXPLANATION_1),
        (HEADLINE_2, EXPLANATION_2),
        (HEADLINE_3, EXPLANATION_3),
        (HEADLINE_4, EXPLANATION_4),
    ]
}

fn mentions_for(headline: &str) -> Option<Vec<(&'static str, f64)>> {
    match headline {
        HEADLINE_1 => Some(vec![("Facebook", 0.99), ("GOP Firm", 0.90), ("Tiktok", 0.98)]),
        HEADLINE_2 => Some(vec![("Apple", 0.99), ("Facebook", 0.99)]),
        HEADLINE_3 => Some(vec![
            ("Apple", 0.99),
            ("Snap", 0.99),
            ("Facebook", 0.99),
            ("Google", 0.99),
        ]),
        HEADLINE_4 => Some(vec![("Apple", 0.99), ("Google", 0.99), ("Facebook", 0.99)]),
        _ => None,
    }
}

fn stock_score_for(headline: &str) -> Option<f64> {
    match headline {
        HEADLINE_1 => Some(0.08),
        HEADLINE_2 => Some(0.07),
        HEADLINE_3 => Some(0.05),
        HEADLINE_4 => Some(0.06),
        STOCK_HEADLINE => Some(0.93),
        _ => None,
    }
}

/// (premise, pair display names) -> scores for positive / negative / neutral.
fn relation_scores_for(premise: &str, hypothesis: &str) -> Option<(f64, f64, f64)> {
    let hyp = |a: &str, b: &str| format!("the relationship between {a} and {b} is {{}}.");
    let table: &[(&str, String, (f64, f64, f64))] = &[
        (HEADLINE_1, hyp("Facebook", "Tiktok"), (0.01, 0.98, 0.01)),
        (HEADLINE_2, hyp("Apple", "Facebook"), (0.02, 0.95, 0.03)),
        (HEADLINE_3, hyp("Apple", "Facebook"), (0.01, 0.96, 0.03)),
        (HEADLINE_3, hyp("Apple", "Google"), (0.54, 0.20, 0.26)),
        (HEADLINE_3, hyp("Apple", "Snap"), (0.01, 0.97, 0.02)),
        (HEADLINE_4, hyp("Apple", "Facebook"), (0.10, 0.70, 0.20)),
        (HEADLINE_4, hyp("Apple", "Google"), (0.30, 0.24, 0.46)),
        (HEADLINE_4, hyp("Facebook", "Google"), (0.10, 0.64, 0.26)),
    ];
    table
        .iter()
        .find(|(p, h, _)| *p == premise && h == hypothesis)
        .map(|(_, _, scores)| *scores)
}

fn context_scores_for(premise: &str) -> Option<Vec<(&'static str, f64)>> {
    match premise {
        HEADLINE_1 => Some(vec![
            ("social media", 0.70),
            ("advertising", 0.10),
            ("legal", 0.08),
            ("privacy", 0.05),
            ("partnership", 0.03),
            ("hardware", 0.02),
            ("cloud", 0.01),
            ("acquisition", 0.01),
        ]),
        HEADLINE_2 => Some(vec![
            ("advertising", 0.55),
            ("privacy", 0.20),
            ("legal", 0.10),
            ("social media", 0.05),
            ("hardware", 0.04),
            ("cloud", 0.03),
            ("acquisition", 0.02),
            ("partnership", 0.01),
        ]),
        HEADLINE_3 => Some(vec![
            ("privacy", 0.90),
            ("advertising", 0.04),
            ("social media", 0.02),
            ("legal", 0.01),
            ("hardware", 0.01),
            ("cloud", 0.01),
            ("acquisition", 0.005),
            ("partnership", 0.005),
        ]),
        HEADLINE_4 => Some(vec![
            ("advertising", 0.40),
            ("social media", 0.25),
            ("hardware", 0.12),
            ("privacy", 0.08),
            ("cloud", 0.06),
            ("legal", 0.04),
            ("acquisition", 0.03),
            ("partnership", 0.02),
        ]),
        _ => None,
    }
}

fn completion_for(headline: &str) -> Option<&'static str> {
    golden_explanations()
        .iter()
        .find(|(h, _)| *h == headline)
        .map(|(_, text)| *text)
}

fn summary_for(pair_display: &str) -> Option<&'static str> {
    match pair_display {
        "Apple and Facebook" => Some(
            "Coverage consistently describes Apple hurting Facebook: privacy changes and a multi-billion revenue hit, with competitive framing repeated across reports.",
        ),
        "Facebook and GOP Firm" => {
            Some("A single report describes a paid engagement: Facebook hired the firm.")
        }
        "Facebook and TikTok" => {
            Some("One report describes Facebook funding a campaign against TikTok.")
        }
        "GOP Firm and TikTok" => {
            Some("One report has the firm paid to discredit TikTok, a negative relationship.")
        }
        "Apple and Snap" => Some("One report says Apple's privacy changes hurt Snap."),
        "Apple and Google" => Some(
            "Reports diverge: one says Google benefited from Apple's privacy changes; another leaves the relationship unstated.",
        ),
        "Facebook and Google" => Some("One report frames Google and Facebook as competitors."),
        _ => None,
    }
}

fn not_found(what: &str) -> TransportError {
    TransportError::new(TransportErrorKind::Status(404), format!("no recorded judgment: {what}"))
}

fn char_index_of(text: &str, needle: &str) -> Option<(usize, usize)> {
    let byte_pos = text.find(needle)?;
    let start = text[..byte_pos].chars().count();
    Some((start, start + needle.chars().count()))
}

/// Serves the golden corpus the way the live services would have, entirely
/// in process. Any request outside its tables gets a 404.
pub struct FakeModelTransport {
    pub calls: AtomicUsize,
}

impl FakeModelTransport {
    pub fn new() -> Self {
        FakeModelTransport {
            calls: AtomicUsize::new(0),
        }
    }

    fn answer_ner(&self, request: &Value) -> Result<Value, TransportError> {
        let text = request["text"].as_str().unwrap_or_default();
        let mentions =
            mentions_for(text).ok_or_else(|| not_found(&format!("ner for {text:?}")))?;
        let mentions: Vec<Value> = mentions
            .into_iter()
            .map(|(surface, score)| {
                let (start, end) = char_index_of(text, surface).expect("surface taken from text");
                json!({"text": surface, "start": start, "end": end, "label": "ORG", "score": score})
            })
            .collect();
        Ok(json!({ "mentions": mentions }))
    }

    fn answer_zsc(&self, request: &Value) -> Result<Value, TransportError> {
        let premise = request["premise"].as_str().unwrap_or_default();
        let template = request["hypothesis_template"].as_str().unwrap_or_default();
        let labels: Vec<&str> = request["candidate_labels"]
            .as_array()
            .map(|a| a.iter().filter_map(Value::as_str).collect())
            .unwrap_or_default();

        if labels.contains(&"stock market report") {
            let stock = stock_score_for(premise)
                .ok_or_else(|| not_found(&format!("stock filter for {premise:?}")))?;
            return Ok(json!({
                "labels": ["stock market report", "business relationship news"],
                "scores": [stock, 1.0 - stock],
            }));
        }
        if labels.contains(&"positive") {
            let (positive, negative, neutral) = relation_scores_for(premise, template)
                .ok_or_else(|| not_found(&format!("relation for {premise:?} / {template:?}")))?;
            let mut out: Vec<(&str, f64)> =
                vec![("positive", positive), ("negative", negative), ("neutral", neutral)];
            if labels.contains(&"unknown") {
                // shave the smallest class to keep the distribution on one
                out = vec![
                    ("positive", positive),
                    ("negative", negative),
                    ("neutral", neutral - 0.01),
                    ("unknown", 0.01),
                ];
            }
            return Ok(json!({
                "labels": out.iter().map(|(l, _)| *l).collect::<Vec<_>>(),
                "scores": out.iter().map(|(_, s)| *s).collect::<Vec<_>>(),
            }));
        }
        // topic tagging
        let topics = context_scores_for(premise)
            .ok_or_else(|| not_found(&format!("context for {premise:?}")))?;
        Ok(json!({
            "labels": topics.iter().map(|(l, _)| *l).collect::<Vec<_>>(),
            "scores": topics.iter().map(|(_, s)| *s).collect::<Vec<_>>(),
        }))
    }

    fn answer_llm(&self, request: &Value) -> Result<Value, TransportError> {
        let model = request["model"].as_str().unwrap_or("fake-model");
        let messages = request["messages"].as_array().cloned().unwrap_or_default();
        let system = messages
            .first()
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default();
        let user = messages
            .last()
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default();

        if system.contains("Extract organization relationships") {
            let headline = user.strip_prefix("Text: ").unwrap_or(user);
            let completion = completion_for(headline)
                .ok_or_else(|| not_found(&format!("completion for {headline:?}")))?;
            return Ok(json!({"text": completion, "model": model}));
        }
        if system.contains("You summarize business relationships") {
            let pair = user
                .split_once("between ")
                .and_then(|(_, rest)| rest.split_once(" across"))
                .map(|(pair, _)| pair)
                .unwrap_or_default();
            let summary =
                summary_for(pair).ok_or_else(|| not_found(&format!("summary for {pair:?}")))?;
            return Ok(json!({"text": summary, "model": model}));
        }
        Err(not_found("llm prompt shape"))
    }
}

impl Default for FakeModelTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for FakeModelTransport {
    fn send(&self, req: &TransportRequest<'_>) -> Result<Vec<u8>, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let request: Value = serde_json::from_slice(req.body)
            .map_err(|e| TransportError::new(TransportErrorKind::Other, e.to_string()))?;
        let response = if request.get("text").is_some() {
            self.answer_ner(&request)?
        } else if request.get("premise").is_some() {
            self.answer_zsc(&request)?
        } else if request.get("messages").is_some() {
            self.answer_llm(&request)?
        } else {
            return Err(not_found("unrecognized request shape"));
        };
        Ok(serde_json::to_vec(&response).expect("response serializes"))
    }
}

/// A transport that counts calls and panics if used: replay mode must never
/// touch the network.
pub struct NoNetworkTransport {
    pub calls: AtomicUsize,
}

impl NoNetworkTransport {
    pub fn new() -> Self {
        NoNetworkTransport {
            calls: AtomicUsize::new(0),
        }
    }
}

impl Default for NoNetworkTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for NoNetworkTransport {
    fn send(&self, _req: &TransportRequest<'_>) -> Result<Vec<u8>, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::new(
            TransportErrorKind::Other,
            "network disabled in this test",
        ))
    }
}

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixtures_dir() -> PathBuf {
    manifest_dir().join("fixtures")
}

/// Config for a replay run over the shipped golden fixtures.
pub fn replay_config(out_dir: &std::path::Path) -> RunConfig {
    RunConfig {
        corpus: fixtures_dir().join("golden_corpus.jsonl"),
        alias_table: fixtures_dir().join("aliases.json"),
        fixtures: Some(fixtures_dir().join("replay")),
        out_dir: out_dir.to_path_buf(),
        ..RunConfig::default()
    }
}

/// Config for recording against the fake model services.
pub fn record_config(fixture_dir: &std::path::Path, out_dir: &std::path::Path) -> RunConfig {
    let mut config = replay_config(out_dir);
    config.mode = signet::gateway::Mode::Record;
    config.fixtures = Some(fixture_dir.to_path_buf());
    config.ner.endpoint = "http://models.test/ner".into();
    config.zsc.endpoint = "http://models.test/zsc".into();
    config.llm.endpoint = "http://models.test/llm".into();
    // keep recorded fixture files in one deterministic order
    config.ner.max_in_flight = 1;
    config.zsc.max_in_flight = 1;
    config.llm.max_in_flight = 1;
    config
}

pub fn replay_gateway_counting(
    config: &RunConfig,
) -> (signet::gateway::Gateway, Arc<NoNetworkTransport>) {
    let transport = Arc::new(NoNetworkTransport::new());
    let gateway = config
        .build_gateway_with_transport(transport.clone() as Arc<dyn Transport>)
        .expect("replay gateway builds");
    (gateway, transport)
}
