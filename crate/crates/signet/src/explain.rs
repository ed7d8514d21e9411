//! LLM pipeline: prompt an instruction-tuned model for per-headline entity
//! extraction plus per-pair sign rationales, parse the completion into
//! structured observations, and summarize rationales per pair.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::entities::{normalize_surface, AliasTable};
use crate::error::{Error, Result};
use crate::gateway::{ChatMessage, Gateway};
use crate::ingest::{Corpus, NewsItem};
use crate::pool::parallel_map;
use crate::relations::{
    ContextTag, EntityPair, ErrorPolicy, Method, PipelineIssue, RelationLabel, RelationObservation,
};

/// Version marker baked into the relation prompt. Bumping it invalidates
/// recorded fixtures on purpose: a changed prompt is a changed request.
pub const RELATION_PROMPT_VERSION: &str = "v1";

/// Sign rationale for one entity pair in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExplanation {
    pub pair: EntityPair,
    pub label: RelationLabel,
    pub rationale: String,
    pub doc_id: String,
    pub display_names: (String, String),
}

/// A completion segment the parser could not use.
#[derive(Debug, Clone, Serialize)]
pub struct ParseDiagnostic {
    pub doc_id: String,
    pub segment: String,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedRelations {
    pub explanations: Vec<PairExplanation>,
    pub diagnostics: Vec<ParseDiagnostic>,
}

/// Build the relation-extraction prompt for one news item.
///
/// The prompt asks for (1) the organization list, (2) one machine-readable
/// `REL:` line per unordered pair, and (3) the `unknown` class for pairs the
/// text says nothing about.
pub fn build_relation_prompt(
    item: &NewsItem,
    class_set: &[RelationLabel],
) -> Result<Vec<ChatMessage>> {
    if item.headline.trim().is_empty() {
        return Err(Error::Precondition("prompt requires a headline".into()));
    }
    if class_set.is_empty() {
        return Err(Error::Precondition(
            "prompt requires a non-empty class set".into(),
        ));
    }
    let classes = class_set
        .iter()
        .map(|c| c.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    let mut instructions = format!(
        "Extract organization relationships from a news item. [prompt {RELATION_PROMPT_VERSION}]\n\
         \n\
         Step 1: List every organization mentioned in the text.\n\
         Step 2: For every unordered pair of distinct organizations, output exactly one line:\n\
         REL: <organization A> | <organization B> | <class> | <rationale>\n\
         \n\
         The class must be one of: {classes}.\n"
    );
    if class_set.contains(&RelationLabel::Unknown) {
        instructions.push_str(
            "Use \"unknown\" when the text does not state a relationship between the pair.\n",
        );
    }
    instructions.push_str("Output only the organization list and the REL lines.");
    Ok(vec![
        ChatMessage::system(instructions),
        ChatMessage::user(format!("Text: {}", item.headline)),
    ])
}

const SIGN_KEYWORDS: [(&str, RelationLabel); 4] = [
    ("positive", RelationLabel::Positive),
    ("negative", RelationLabel::Negative),
    ("neutral", RelationLabel::Neutral),
    ("unknown", RelationLabel::Unknown),
];

fn resolve_name(name: &str, table: &AliasTable) -> String {
    match table.lookup(name) {
        Some(id) => id.to_string(),
        None => crate::digest::slugify(&normalize_surface(name)),
    }
}

fn make_explanation(
    a_name: &str,
    b_name: &str,
    label: RelationLabel,
    rationale: &str,
    item: &NewsItem,
    table: &AliasTable,
) -> std::result::Result<PairExplanation, String> {
    let a_id = resolve_name(a_name, table);
    let b_id = resolve_name(b_name, table);
    if a_id.is_empty() || b_id.is_empty() {
        return Err("entity name normalizes to nothing".into());
    }
    let pair = EntityPair::new(a_id.clone(), b_id).map_err(|e| e.to_string())?;
    // keep display names aligned with the canonical pair order
    let (first, second) = if pair.a() == a_id {
        (a_name, b_name)
    } else {
        (b_name, a_name)
    };
    Ok(PairExplanation {
        pair,
        label,
        rationale: rationale.trim().to_string(),
        doc_id: item.id.clone(),
        display_names: (first.trim().to_string(), second.trim().to_string()),
    })
}

/// First sign keyword at a word boundary, scanning left to right.
fn first_sign_keyword(text: &str) -> Option<RelationLabel> {
    let lower = text.to_lowercase();
    let bytes = lower.as_bytes();
    let mut best: Option<(usize, RelationLabel)> = None;
    for (word, label) in SIGN_KEYWORDS {
        let mut from = 0;
        while let Some(pos) = lower[from..].find(word) {
            let at = from + pos;
            let before_ok = at == 0 || !bytes[at - 1].is_ascii_alphabetic();
            let end = at + word.len();
            let after_ok = end >= bytes.len() || !bytes[end].is_ascii_alphabetic();
            if before_ok && after_ok {
                if best.is_none_or(|(b, _)| at < b) {
                    best = Some((at, label));
                }
                break;
            }
            from = end;
        }
    }
    best.map(|(_, label)| label)
}

fn parse_rel_line(
    line: &str,
    item: &NewsItem,
    table: &AliasTable,
) -> std::result::Result<PairExplanation, String> {
    let rest = line.trim().strip_prefix("REL:").expect("caller checked");
    let parts: Vec<&str> = rest.splitn(4, '|').map(str::trim).collect();
    if parts.len() < 3 {
        return Err(format!("expected `A | B | class | rationale`, got {} field(s)", parts.len()));
    }
    let label = RelationLabel::parse(parts[2])
        .ok_or_else(|| format!("unknown class `{}`", parts[2]))?;
    let rationale = parts.get(3).copied().unwrap_or_default();
    if label != RelationLabel::Unknown && rationale.is_empty() {
        return Err("missing rationale for a signed relation".into());
    }
    make_explanation(parts[0], parts[1], label, rationale, item, table)
}

/// Prose segment of the shape `A and B: ... <sign> ...`.
fn parse_prose_segment(
    segment: &str,
    item: &NewsItem,
    table: &AliasTable,
) -> std::result::Result<PairExplanation, String> {
    let (prefix, rest) = segment
        .split_once(':')
        .ok_or_else(|| "no `A and B:` prefix".to_string())?;
    let (a_name, b_name) = prefix
        .trim()
        .split_once(" and ")
        .ok_or_else(|| "prefix does not name a pair".to_string())?;
    let label =
        first_sign_keyword(rest).ok_or_else(|| "no sign keyword in segment".to_string())?;
    make_explanation(a_name, b_name, label, rest, item, table)
}

/// Parse an LLM completion into pair explanations.
///
/// `REL:` lines are the primary format. When a completion contains none,
/// the parser falls back to prose segments of the form
/// `A and B: ... appears to be <sign> ...`. Unparseable segments produce
/// diagnostics, never errors; a completely unparseable completion yields an
/// empty list plus a diagnostic retaining the raw text.
pub fn parse_llm_relations(
    completion: &str,
    item: &NewsItem,
    table: &AliasTable,
) -> ParsedRelations {
    let mut parsed = ParsedRelations::default();
    if completion.trim().is_empty() {
        parsed.diagnostics.push(ParseDiagnostic {
            doc_id: item.id.clone(),
            segment: completion.to_string(),
            reason: "empty completion".into(),
        });
        return parsed;
    }

    let rel_lines: Vec<&str> = completion
        .lines()
        .map(str::trim)
        .filter(|l| l.starts_with("REL:"))
        .collect();

    if !rel_lines.is_empty() {
        for line in rel_lines {
            match parse_rel_line(line, item, table) {
                Ok(explanation) => parsed.explanations.push(explanation),
                Err(reason) => parsed.diagnostics.push(ParseDiagnostic {
                    doc_id: item.id.clone(),
                    segment: line.to_string(),
                    reason,
                }),
            }
        }
        return parsed;
    }

    for segment in completion.lines().map(str::trim).filter(|l| !l.is_empty()) {
        match parse_prose_segment(segment, item, table) {
            Ok(explanation) => parsed.explanations.push(explanation),
            Err(reason) => parsed.diagnostics.push(ParseDiagnostic {
                doc_id: item.id.clone(),
                segment: segment.to_string(),
                reason,
            }),
        }
    }
    if parsed.explanations.is_empty() && parsed.diagnostics.is_empty() {
        parsed.diagnostics.push(ParseDiagnostic {
            doc_id: item.id.clone(),
            segment: completion.to_string(),
            reason: "nothing parseable".into(),
        });
    }
    parsed
}

/// Confidence assigned to LLM-derived observations, which carry no
/// calibrated score of their own.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorePolicy {
    pub signed_score: f64,
    pub unknown_score: f64,
}

impl Default for ScorePolicy {
    fn default() -> Self {
        ScorePolicy {
            signed_score: 1.0,
            unknown_score: 0.0,
        }
    }
}

/// Convert explanations into observations with `method = llm`.
pub fn llm_observations(
    explanations: &[PairExplanation],
    policy: ScorePolicy,
    corpus: &Corpus,
) -> Vec<RelationObservation> {
    explanations
        .iter()
        .map(|e| {
            let published_at = corpus
                .get(&e.doc_id)
                .map(|item| item.published_at)
                .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
            let score = match e.label {
                RelationLabel::Unknown => policy.unknown_score,
                _ => policy.signed_score,
            };
            RelationObservation {
                pair: e.pair.clone(),
                label: e.label,
                score,
                doc_id: e.doc_id.clone(),
                published_at,
                context: None::<ContextTag>,
                method: Method::Llm,
                display_names: e.display_names.clone(),
            }
        })
        .collect()
}

/// Cross-document summary for one entity pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationSummary {
    pub pair: EntityPair,
    pub summary: String,
    pub observation_count: usize,
    pub doc_ids: Vec<String>,
}

/// Summarize the rationales recorded for one pair, chronologically.
pub fn summarize_pair(
    pair: &EntityPair,
    explanations: &[PairExplanation],
    gateway: &Gateway,
    corpus: &Corpus,
) -> Result<ExplanationSummary> {
    if explanations.is_empty() {
        return Err(Error::Precondition(
            "summarize_pair requires at least one explanation".into(),
        ));
    }
    if explanations.iter().any(|e| &e.pair != pair) {
        return Err(Error::Precondition(
            "summarize_pair received an explanation for a different pair".into(),
        ));
    }
    let mut ordered: Vec<&PairExplanation> = explanations.iter().collect();
    ordered.sort_by_key(|e| {
        let at = corpus
            .get(&e.doc_id)
            .map(|i| i.published_at)
            .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
        (at, e.doc_id.clone())
    });

    let (a_display, b_display) = ordered[0].display_names.clone();
    let mut body = format!(
        "Summarize the relationship between {a_display} and {b_display} across these reports, oldest first:\n"
    );
    for e in &ordered {
        body.push_str(&format!("- [{}] {}\n", e.label, e.rationale));
    }
    let messages = vec![
        ChatMessage::system(
            "You summarize business relationships from per-article rationales. Reply with a short paragraph.",
        ),
        ChatMessage::user(body),
    ];
    let result = gateway.llm_complete(&messages)?;

    let mut doc_ids: Vec<String> = Vec::new();
    for e in &ordered {
        if !doc_ids.contains(&e.doc_id) {
            doc_ids.push(e.doc_id.clone());
        }
    }
    Ok(ExplanationSummary {
        pair: pair.clone(),
        summary: result.text,
        observation_count: doc_ids.len(),
        doc_ids,
    })
}

#[derive(Debug, Clone, Default)]
pub struct LlmPipelineOptions {
    pub score_policy: ScorePolicy,
    pub summaries: bool,
    pub error_policy: ErrorPolicy,
}

#[derive(Debug, Default)]
pub struct LlmPipelineOutcome {
    pub explanations: Vec<PairExplanation>,
    pub observations: Vec<RelationObservation>,
    pub summaries: Vec<ExplanationSummary>,
    pub diagnostics: Vec<ParseDiagnostic>,
    pub issues: Vec<PipelineIssue>,
}

/// Run the LLM pipeline over an already-filtered corpus. The prompt always
/// carries the full four-class set so the model can answer `unknown`.
pub fn run_llm_pipeline(
    corpus: &Corpus,
    table: &AliasTable,
    gateway: &Gateway,
    options: &LlmPipelineOptions,
) -> Result<LlmPipelineOutcome> {
    let class_set = [
        RelationLabel::Positive,
        RelationLabel::Negative,
        RelationLabel::Neutral,
        RelationLabel::Unknown,
    ];

    let mut outcome = LlmPipelineOutcome::default();
    let per_item = |item: &NewsItem| -> Result<ParsedRelations> {
        let prompt = build_relation_prompt(item, &class_set)?;
        let completion = gateway
            .llm_complete(&prompt)
            .map_err(|e| e.for_doc(&item.id, "llm"))?;
        if completion.text.trim().is_empty() {
            return Ok(ParsedRelations {
                explanations: Vec::new(),
                diagnostics: vec![ParseDiagnostic {
                    doc_id: item.id.clone(),
                    segment: String::new(),
                    reason: format!("empty completion from model {}", completion.model_id),
                }],
            });
        }
        Ok(parse_llm_relations(&completion.text, item, table))
    };

    match options.error_policy {
        ErrorPolicy::FailFast => {
            for item in corpus.items() {
                let parsed = per_item(item)?;
                outcome.explanations.extend(parsed.explanations);
                outcome.diagnostics.extend(parsed.diagnostics);
            }
        }
        ErrorPolicy::Skip => {
            let workers = gateway.llm_backend().max_in_flight();
            let results = parallel_map(corpus.items(), workers, |_, item| per_item(item));
            for (item, result) in corpus.items().iter().zip(results) {
                match result {
                    Ok(parsed) => {
                        outcome.explanations.extend(parsed.explanations);
                        outcome.diagnostics.extend(parsed.diagnostics);
                    }
                    Err(err) => outcome.issues.push(PipelineIssue {
                        stage: "llm".into(),
                        doc_id: item.id.clone(),
                        pair: None,
                        message: err.to_string(),
                    }),
                }
            }
        }
    }

    outcome.observations = llm_observations(&outcome.explanations, options.score_policy, corpus);

    if options.summaries {
        let mut by_pair: BTreeMap<EntityPair, Vec<PairExplanation>> = BTreeMap::new();
        for e in &outcome.explanations {
            by_pair.entry(e.pair.clone()).or_default().push(e.clone());
        }
        for (pair, explanations) in by_pair {
            match summarize_pair(&pair, &explanations, gateway, corpus) {
                Ok(summary) => outcome.summaries.push(summary),
                Err(err) => match options.error_policy {
                    ErrorPolicy::FailFast => return Err(err),
                    ErrorPolicy::Skip => outcome.issues.push(PipelineIssue {
                        stage: "summarize".into(),
                        doc_id: explanations
                            .first()
                            .map(|e| e.doc_id.clone())
                            .unwrap_or_default(),
                        pair: Some(pair),
                        message: err.to_string(),
                    }),
                },
            }
        }
    }
    Ok(outcome)
}

pub fn write_explanations(
    explanations: &[PairExplanation],
    out: &mut impl std::io::Write,
) -> Result<()> {
    for e in explanations {
        let line = serde_json::to_string(e).expect("explanation serializes");
        writeln!(out, "{line}").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn write_summaries(
    summaries: &[ExplanationSummary],
    out: &mut impl std::io::Write,
) -> Result<()> {
    for s in summaries {
        let line = serde_json::to_string(s).expect("summary serializes");
        writeln!(out, "{line}").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entities::CanonicalEntity;
    use chrono::TimeZone;

    fn table() -> AliasTable {
        AliasTable::from_entities(vec![
            CanonicalEntity::new("apple", "Apple", [], None),
            CanonicalEntity::new("facebook", "Facebook", ["Meta".to_string()], None),
            CanonicalEntity::new("google", "Google", [], None),
            CanonicalEntity::new("tiktok", "TikTok", ["Tiktok".to_string()], None),
        ])
        .unwrap()
    }

    fn item(headline: &str) -> NewsItem {
        NewsItem::new(
            headline,
            None,
            Utc.with_ymd_and_hms(2022, 4, 1, 0, 0, 0).unwrap(),
            "wire",
            format!("https://e.com/{}", crate::digest::slugify(headline)),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn prompt_contains_headline_and_classes() {
        let i = item("Facebook Paid GOP Firm to Malign Tiktok");
        let class_set = ClassSetFull::all();
        let messages = build_relation_prompt(&i, class_set).unwrap();
        assert_eq!(messages.len(), 2);
        let joined = format!("{} {}", messages[0].content, messages[1].content);
        assert!(joined.contains("Facebook Paid GOP Firm to Malign Tiktok"));
        for class in ["positive", "negative", "neutral", "unknown"] {
            assert!(joined.contains(class), "missing class {class}");
        }
        assert!(joined.contains(RELATION_PROMPT_VERSION));
    }

    struct ClassSetFull;
    impl ClassSetFull {
        fn all() -> &'static [RelationLabel] {
            &[
                RelationLabel::Positive,
                RelationLabel::Negative,
                RelationLabel::Neutral,
                RelationLabel::Unknown,
            ]
        }
    }

    #[test]
    fn empty_class_set_is_a_precondition_error() {
        let i = item("Anything at all");
        assert!(matches!(
            build_relation_prompt(&i, &[]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn strict_format_round_trips() {
        let i = item("Apple squeezes Facebook");
        let t = table();
        let completion = "Organizations: Apple, Facebook, Google\n\
             REL: Apple | Facebook | negative | fee changes cited\n\
             REL: Apple | Google | unknown |\n\
             REL: Facebook | Google | positive | joint venture announced\n";
        let parsed = parse_llm_relations(completion, &i, &t);
        assert!(parsed.diagnostics.is_empty(), "{:?}", parsed.diagnostics);
        let got: Vec<(String, String, RelationLabel)> = parsed
            .explanations
            .iter()
            .map(|e| (e.pair.a().to_string(), e.pair.b().to_string(), e.label))
            .collect();
        assert_eq!(
            got,
            vec![
                ("apple".into(), "facebook".into(), RelationLabel::Negative),
                ("apple".into(), "google".into(), RelationLabel::Unknown),
                ("facebook".into(), "google".into(), RelationLabel::Positive),
            ]
        );
    }

    #[test]
    fn malformed_rel_line_yields_diagnostic_not_error() {
        let i = item("Apple squeezes Facebook");
        let t = table();
        let parsed = parse_llm_relations("REL: Apple | Facebook | sideways | ?", &i, &t);
        assert!(parsed.explanations.is_empty());
        assert_eq!(parsed.diagnostics.len(), 1);
    }

    #[test]
    fn prose_fallback_parses_pair_segments() {
        let i = item("Facebook Paid GOP Firm to Malign Tiktok");
        let t = table();
        let completion = "Facebook and GOP Firm: The relationship appears to be positive, as payment indicates a business relationship.\n\
             Facebook and TikTok: The relationship appears to be negative, given the intent to malign.\n\
             GOP Firm and TikTok: The relationship can also be interpreted as negative.";
        let parsed = parse_llm_relations(completion, &i, &t);
        assert!(parsed.diagnostics.is_empty());
        let got: Vec<(String, String, RelationLabel)> = parsed
            .explanations
            .iter()
            .map(|e| (e.pair.a().to_string(), e.pair.b().to_string(), e.label))
            .collect();
        assert_eq!(
            got,
            vec![
                ("facebook".into(), "gop-firm".into(), RelationLabel::Positive),
                ("facebook".into(), "tiktok".into(), RelationLabel::Negative),
                ("gop-firm".into(), "tiktok".into(), RelationLabel::Negative),
            ]
        );
    }

    #[test]
    fn prose_unknown_classification_is_detected() {
        let i = item("Apple and Google compete against Facebook");
        let t = table();
        let segment = "Apple and Google: The relationship between Apple and Google is not directly mentioned in the headline, so it would be classified as unknown based on the information provided.";
        let parsed = parse_llm_relations(segment, &i, &t);
        assert_eq!(parsed.explanations.len(), 1);
        assert_eq!(parsed.explanations[0].label, RelationLabel::Unknown);
    }

    #[test]
    fn empty_completion_gives_diagnostic() {
        let i = item("Anything");
        let parsed = parse_llm_relations("   ", &i, &table());
        assert!(parsed.explanations.is_empty());
        assert_eq!(parsed.diagnostics.len(), 1);
        assert_eq!(parsed.diagnostics[0].reason, "empty completion");
    }

    #[test]
    fn sign_keyword_takes_first_occurrence() {
        assert_eq!(
            first_sign_keyword("appears to be negative, despite positive spin"),
            Some(RelationLabel::Negative)
        );
        assert_eq!(
            first_sign_keyword("nothing conclusive here"),
            None
        );
        // word boundary: "positively" is not "positive"
        assert_eq!(
            first_sign_keyword("reacted positively, then negative"),
            Some(RelationLabel::Negative)
        );
    }

    #[test]
    fn observations_map_one_to_one_with_policy_scores() {
        let i = item("Apple squeezes Facebook");
        let (corpus, _) = Corpus::from_items(vec![i.clone()]);
        let explanations = vec![
            PairExplanation {
                pair: EntityPair::new("apple", "facebook").unwrap(),
                label: RelationLabel::Negative,
                rationale: "fee change".into(),
                doc_id: i.id.clone(),
                display_names: ("Apple".into(), "Facebook".into()),
            },
            PairExplanation {
                pair: EntityPair::new("apple", "google").unwrap(),
                label: RelationLabel::Unknown,
                rationale: String::new(),
                doc_id: i.id.clone(),
                display_names: ("Apple".into(), "Google".into()),
            },
        ];
        let observations = llm_observations(&explanations, ScorePolicy::default(), &corpus);
        assert_eq!(observations.len(), 2);
        assert_eq!(observations[0].score, 1.0);
        assert_eq!(observations[0].published_at, i.published_at);
        assert!(matches!(observations[0].method, Method::Llm));
        assert_eq!(observations[1].score, 0.0);
    }

    #[test]
    fn summarize_requires_matching_nonempty_input() {
        let pair = EntityPair::new("apple", "facebook").unwrap();
        let (corpus, _) = Corpus::from_items(vec![]);
        // empty input
        let gateway_err = summarize_pair_unavailable();
        let err = summarize_pair(&pair, &[], &gateway_err, &corpus).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    // a gateway that must never be called; summarize should fail before use
    fn summarize_pair_unavailable() -> Gateway {
        use crate::gateway::{Backend, BackendConfig, Capability, Mode, Transport, TransportError, TransportErrorKind, TransportRequest};
        use std::sync::Arc;
        struct NoTransport;
        impl Transport for NoTransport {
            fn send(&self, _req: &TransportRequest<'_>) -> std::result::Result<Vec<u8>, TransportError> {
                Err(TransportError::new(TransportErrorKind::Other, "unavailable"))
            }
        }
        let mk = |cap| {
            Backend::new(
                cap,
                BackendConfig::new("http://unused.test", "m", Mode::Live),
                Arc::new(NoTransport),
                None,
            )
            .unwrap()
        };
        Gateway::new(mk(Capability::Ner), mk(Capability::Zsc), mk(Capability::Llm))
    }
}
