//! Relation extraction: classify every entity pair mentioned in a document
//! with a hypothesis-template zero-shot classifier.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::digest::content_id;
use crate::entities::{AliasTable, ResolvedMention};
use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::ingest::{filter_stock_news, Corpus, NewsItem, StockFilterConfig};
use crate::pool::parallel_map;

/// Unordered entity pair, canonically ordered `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct EntityPair {
    a: String,
    b: String,
}

#[derive(Serialize, Deserialize)]
struct RawPair {
    a: String,
    b: String,
}

impl TryFrom<RawPair> for EntityPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        EntityPair::new(raw.a, raw.b)
    }
}

impl EntityPair {
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Result<Self> {
        let x = x.into();
        let y = y.into();
        if x == y {
            return Err(Error::InvalidArgument(format!(
                "entity pair requires two distinct ids (got `{x}` twice)"
            )));
        }
        let (a, b) = if x < y { (x, y) } else { (y, x) };
        Ok(EntityPair { a, b })
    }

    pub fn a(&self) -> &str {
        &self.a
    }

    pub fn b(&self) -> &str {
        &self.b
    }
}

impl fmt::Display for EntityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.a, self.b)
    }
}

impl std::str::FromStr for EntityPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s.split_once(',').ok_or_else(|| {
            Error::InvalidArgument(format!("expected `a,b` pair, got `{s}`"))
        })?;
        EntityPair::new(a.trim(), b.trim())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    Positive,
    Negative,
    Neutral,
    Unknown,
}

impl RelationLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Positive => "positive",
            RelationLabel::Negative => "negative",
            RelationLabel::Neutral => "neutral",
            RelationLabel::Unknown => "unknown",
        }
    }

    /// Edge-weight sign; `None` for Unknown, which never contributes.
    pub fn sign(self) -> Option<f64> {
        match self {
            RelationLabel::Positive => Some(1.0),
            RelationLabel::Negative => Some(-1.0),
            RelationLabel::Neutral => Some(0.0),
            RelationLabel::Unknown => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(RelationLabel::Positive),
            "negative" => Some(RelationLabel::Negative),
            "neutral" => Some(RelationLabel::Neutral),
            "unknown" => Some(RelationLabel::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The candidate class set for zero-shot relation classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassSet {
    /// positive / negative / neutral
    #[default]
    Three,
    /// positive / negative / neutral / unknown
    Four,
}

impl ClassSet {
    pub fn labels(self) -> &'static [RelationLabel] {
        match self {
            ClassSet::Three => &[
                RelationLabel::Positive,
                RelationLabel::Negative,
                RelationLabel::Neutral,
            ],
            ClassSet::Four => &[
                RelationLabel::Positive,
                RelationLabel::Negative,
                RelationLabel::Neutral,
                RelationLabel::Unknown,
            ],
        }
    }

    pub fn label_strings(self) -> Vec<String> {
        self.labels().iter().map(|l| l.as_str().to_string()).collect()
    }
}

impl std::str::FromStr for ClassSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3" => Ok(ClassSet::Three),
            "4" => Ok(ClassSet::Four),
            other => Err(Error::InvalidArgument(format!(
                "classes must be 3 or 4, got `{other}`"
            ))),
        }
    }
}

/// Relation hypothesis with `{A}`, `{B}`, `{CLASS}` placeholders, each
/// required exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisTemplate {
    text: String,
}

pub const DEFAULT_HYPOTHESIS_TEMPLATE: &str = "the relationship between {A} and {B} is {CLASS}.";

impl HypothesisTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        for placeholder in ["{A}", "{B}", "{CLASS}"] {
            if text.matches(placeholder).count() != 1 {
                return Err(Error::InvalidArgument(format!(
                    "template must contain {placeholder} exactly once: {text:?}"
                )));
            }
        }
        Ok(HypothesisTemplate { text })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Fill `{A}`/`{B}` with display names and turn `{CLASS}` into the wire
    /// template's `{}` placeholder.
    pub fn instantiate(&self, a_display: &str, b_display: &str) -> String {
        self.text
            .replace("{A}", a_display)
            .replace("{B}", b_display)
            .replace("{CLASS}", "{}")
    }
}

impl Default for HypothesisTemplate {
    fn default() -> Self {
        HypothesisTemplate::new(DEFAULT_HYPOTHESIS_TEMPLATE).expect("default template is valid")
    }
}

/// Topic tag attached to an observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTag {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Zsc,
    Llm,
}

/// One (entity pair, sign label, confidence, provenance) judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationObservation {
    pub pair: EntityPair,
    pub label: RelationLabel,
    pub score: f64,
    pub doc_id: String,
    pub published_at: DateTime<Utc>,
    pub context: Option<ContextTag>,
    pub method: Method,
    pub display_names: (String, String),
}

impl RelationObservation {
    /// Stable content-derived id used for edge provenance.
    pub fn observation_id(&self) -> String {
        content_id(&[
            &self.doc_id,
            self.pair.a(),
            self.pair.b(),
            self.method_str(),
            self.label.as_str(),
            &format!("{:.6}", self.score),
        ])
    }

    fn method_str(&self) -> &'static str {
        match self.method {
            Method::Zsc => "zsc",
            Method::Llm => "llm",
        }
    }
}

/// All unordered pairs of distinct node ids over the resolved mentions,
/// in lexicographic order. Duplicate mentions of one entity collapse.
pub fn enumerate_pairs(resolved: &[ResolvedMention], include_unresolved: bool) -> Vec<EntityPair> {
    let mut ids: Vec<String> = resolved
        .iter()
        .filter(|m| include_unresolved || m.is_resolved())
        .map(|m| m.node_id())
        .collect();
    ids.sort();
    ids.dedup();
    let mut pairs = Vec::new();
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            pairs.push(EntityPair {
                a: ids[i].clone(),
                b: ids[j].clone(),
            });
        }
    }
    pairs
}

/// First mention surface per node id, used to fill hypothesis templates
/// with the names the document actually uses.
pub fn display_names(resolved: &[ResolvedMention]) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    for m in resolved {
        map.entry(m.node_id()).or_insert_with(|| m.mention.surface.clone());
    }
    map
}

/// Topic labels for the optional `<Context>` tag.
#[derive(Debug, Clone)]
pub struct ContextOptions {
    pub topic_labels: Vec<String>,
    pub hypothesis_template: String,
}

impl Default for ContextOptions {
    fn default() -> Self {
        ContextOptions {
            topic_labels: [
                "privacy",
                "advertising",
                "hardware",
                "cloud",
                "social media",
                "legal",
                "acquisition",
                "partnership",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            hypothesis_template: "This news is about {}.".into(),
        }
    }
}

/// Classify the document's dominant topic.
pub fn extract_context(
    item: &NewsItem,
    gateway: &Gateway,
    options: &ContextOptions,
    use_summary: bool,
) -> Result<ContextTag> {
    if options.topic_labels.is_empty() {
        return Err(Error::Precondition("context requires topic labels".into()));
    }
    let premise = item.premise_text(use_summary);
    let result = gateway.zsc(&premise, &options.hypothesis_template, &options.topic_labels)?;
    let (label, score) = result.top();
    Ok(ContextTag {
        label: label.to_string(),
        score,
    })
}

/// Classify one pair's relationship in one document.
#[allow(clippy::too_many_arguments)]
pub fn classify_relation(
    item: &NewsItem,
    pair: &EntityPair,
    names: &BTreeMap<String, String>,
    template: &HypothesisTemplate,
    class_set: ClassSet,
    gateway: &Gateway,
    context: Option<ContextTag>,
    use_summary: bool,
) -> Result<RelationObservation> {
    let a_display = names.get(pair.a()).cloned().unwrap_or_else(|| pair.a().to_string());
    let b_display = names.get(pair.b()).cloned().unwrap_or_else(|| pair.b().to_string());
    let hypothesis = template.instantiate(&a_display, &b_display);
    let premise = item.premise_text(use_summary);
    let result = gateway.zsc(&premise, &hypothesis, &class_set.label_strings())?;
    let (top_label, score) = result.top();
    let label = RelationLabel::parse(top_label).ok_or_else(|| Error::Protocol {
        capability: crate::gateway::Capability::Zsc,
        message: format!("unexpected class label `{top_label}`"),
    })?;
    Ok(RelationObservation {
        pair: pair.clone(),
        label,
        score,
        doc_id: item.id.clone(),
        published_at: item.published_at,
        context,
        method: Method::Zsc,
        display_names: (a_display, b_display),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorPolicy {
    FailFast,
    #[default]
    Skip,
}

impl std::str::FromStr for ErrorPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail-fast" | "fail" => Ok(ErrorPolicy::FailFast),
            "skip" => Ok(ErrorPolicy::Skip),
            other => Err(Error::InvalidArgument(format!(
                "unknown error policy `{other}` (expected fail-fast|skip)"
            ))),
        }
    }
}

/// A non-fatal failure collected while running a pipeline under the skip
/// policy.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineIssue {
    pub stage: String,
    pub doc_id: String,
    pub pair: Option<EntityPair>,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ZscPipelineOptions {
    pub class_set: ClassSet,
    pub template: HypothesisTemplate,
    pub stock_filter: StockFilterConfig,
    pub context: Option<ContextOptions>,
    pub include_unresolved: bool,
    pub use_summary: bool,
    pub error_policy: ErrorPolicy,
}

impl Default for ZscPipelineOptions {
    fn default() -> Self {
        ZscPipelineOptions {
            class_set: ClassSet::Three,
            template: HypothesisTemplate::default(),
            stock_filter: StockFilterConfig::default(),
            context: None,
            include_unresolved: true,
            use_summary: false,
            error_policy: ErrorPolicy::Skip,
        }
    }
}

#[derive(Debug, Default)]
pub struct ZscPipelineOutcome {
    pub kept: Corpus,
    pub dropped: Corpus,
    pub observations: Vec<RelationObservation>,
    pub issues: Vec<PipelineIssue>,
}

fn process_item(
    item: &NewsItem,
    table: &AliasTable,
    gateway: &Gateway,
    options: &ZscPipelineOptions,
) -> std::result::Result<(Vec<RelationObservation>, Vec<PipelineIssue>), Error> {
    let text = item.premise_text(options.use_summary);
    let mentions = gateway
        .ner(&text)
        .map_err(|e| e.for_doc(&item.id, "ner"))?;
    let resolved: Vec<ResolvedMention> = mentions.iter().map(|m| table.resolve(m)).collect();
    let pairs = enumerate_pairs(&resolved, options.include_unresolved);
    if pairs.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let names = display_names(&resolved);
    let context = match &options.context {
        Some(ctx) => Some(
            extract_context(item, gateway, ctx, options.use_summary)
                .map_err(|e| e.for_doc(&item.id, "context"))?,
        ),
        None => None,
    };
    let mut observations = Vec::new();
    let mut issues = Vec::new();
    for pair in &pairs {
        match classify_relation(
            item,
            pair,
            &names,
            &options.template,
            options.class_set,
            gateway,
            context.clone(),
            options.use_summary,
        ) {
            Ok(obs) => observations.push(obs),
            Err(err) => match options.error_policy {
                ErrorPolicy::FailFast => {
                    return Err(err.for_doc(&item.id, "classify"));
                }
                ErrorPolicy::Skip => issues.push(PipelineIssue {
                    stage: "classify".into(),
                    doc_id: item.id.clone(),
                    pair: Some(pair.clone()),
                    message: err.to_string(),
                }),
            },
        }
    }
    Ok((observations, issues))
}

/// The full headline-to-observations composition: stock filter, NER,
/// resolution, pair enumeration, optional context tagging, and per-pair
/// relation classification. Output order is (corpus order, pair order)
/// regardless of scheduling.
pub fn run_zsc_pipeline(
    corpus: &Corpus,
    table: &AliasTable,
    gateway: &Gateway,
    options: &ZscPipelineOptions,
) -> Result<ZscPipelineOutcome> {
    let (kept, dropped) = filter_stock_news(corpus, gateway, &options.stock_filter)?;

    let mut outcome = ZscPipelineOutcome {
        kept: kept.clone(),
        dropped,
        ..Default::default()
    };

    match options.error_policy {
        ErrorPolicy::FailFast => {
            for item in kept.items() {
                let (obs, issues) = process_item(item, table, gateway, options)?;
                outcome.observations.extend(obs);
                outcome.issues.extend(issues);
            }
        }
        ErrorPolicy::Skip => {
            let workers = gateway.zsc_backend().max_in_flight();
            let results = parallel_map(kept.items(), workers, |_, item| {
                process_item(item, table, gateway, options)
            });
            for (item, result) in kept.items().iter().zip(results) {
                match result {
                    Ok((obs, issues)) => {
                        outcome.observations.extend(obs);
                        outcome.issues.extend(issues);
                    }
                    Err(err) => outcome.issues.push(PipelineIssue {
                        stage: "item".into(),
                        doc_id: item.id.clone(),
                        pair: None,
                        message: err.to_string(),
                    }),
                }
            }
        }
    }
    Ok(outcome)
}

/// Serialize observations one JSON object per line.
pub fn write_observations(
    observations: &[RelationObservation],
    out: &mut impl std::io::Write,
) -> Result<()> {
    for obs in observations {
        let line = serde_json::to_string(obs).expect("observation serializes");
        writeln!(out, "{line}").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn read_observations(path: &std::path::Path) -> Result<Vec<RelationObservation>> {
    use std::io::BufRead;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut observations = Vec::new();
    for (idx, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let obs: RelationObservation = serde_json::from_str(&line).map_err(|e| {
            Error::InvalidArgument(format!("{} line {}: {}", path.display(), idx + 1, e))
        })?;
        observations.push(obs);
    }
    Ok(observations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entities::{CanonicalEntity, Resolution};
    use crate::gateway::MentionResult;

    fn resolved(surface: &str, id: Option<&str>) -> ResolvedMention {
        ResolvedMention {
            mention: MentionResult {
                surface: surface.into(),
                start: 0,
                end: surface.chars().count(),
                label: "ORG".into(),
                score: 0.99,
            },
            resolution: match id {
                Some(id) => Resolution::Entity(id.into()),
                None => Resolution::Unresolved(crate::entities::normalize_surface(surface)),
            },
        }
    }

    #[test]
    fn pair_canonical_ordering() {
        let p = EntityPair::new("facebook", "apple").unwrap();
        assert_eq!(p.a(), "apple");
        assert_eq!(p.b(), "facebook");
        assert_eq!(p, EntityPair::new("apple", "facebook").unwrap());
        assert!(EntityPair::new("apple", "apple").is_err());
    }

    #[test]
    fn pair_deserialization_reorders() {
        let p: EntityPair = serde_json::from_str(r#"{"a":"zeta","b":"alpha"}"#).unwrap();
        assert_eq!(p.a(), "alpha");
    }

    #[test]
    fn four_mentions_give_six_pairs() {
        let mentions = vec![
            resolved("Apple", Some("apple")),
            resolved("Snap", Some("snap")),
            resolved("Facebook", Some("facebook")),
            resolved("Google", Some("google")),
        ];
        let pairs = enumerate_pairs(&mentions, true);
        assert_eq!(pairs.len(), 6);
        assert!(pairs.contains(&EntityPair::new("apple", "snap").unwrap()));
        assert!(pairs.contains(&EntityPair::new("apple", "facebook").unwrap()));
        assert!(pairs.contains(&EntityPair::new("apple", "google").unwrap()));
        // lexicographic order
        let mut sorted = pairs.clone();
        sorted.sort();
        assert_eq!(pairs, sorted);
    }

    #[test]
    fn single_mention_gives_no_pairs() {
        assert!(enumerate_pairs(&[resolved("Apple", Some("apple"))], true).is_empty());
    }

    #[test]
    fn duplicate_mentions_collapse() {
        let mentions = vec![
            resolved("Apple", Some("apple")),
            resolved("Apple", Some("apple")),
            resolved("Facebook", Some("facebook")),
        ];
        let pairs = enumerate_pairs(&mentions, true);
        assert_eq!(pairs, vec![EntityPair::new("apple", "facebook").unwrap()]);
    }

    #[test]
    fn unresolved_mentions_can_be_excluded() {
        let mentions = vec![
            resolved("Facebook", Some("facebook")),
            resolved("GOP Firm", None),
            resolved("Tiktok", Some("tiktok")),
        ];
        assert_eq!(enumerate_pairs(&mentions, true).len(), 3);
        let only_resolved = enumerate_pairs(&mentions, false);
        assert_eq!(only_resolved, vec![EntityPair::new("facebook", "tiktok").unwrap()]);
    }

    #[test]
    fn template_validation_and_instantiation() {
        let t = HypothesisTemplate::default();
        assert_eq!(
            t.instantiate("Apple", "Facebook"),
            "the relationship between Apple and Facebook is {}."
        );
        assert!(HypothesisTemplate::new("no placeholders").is_err());
        assert!(HypothesisTemplate::new("{A} {A} {B} {CLASS}").is_err());
    }

    #[test]
    fn display_names_prefer_first_mention() {
        let mentions = vec![
            resolved("Meta", Some("facebook")),
            resolved("Facebook", Some("facebook")),
        ];
        let names = display_names(&mentions);
        assert_eq!(names.get("facebook").unwrap(), "Meta");
    }

    #[test]
    fn observation_id_is_content_stable() {
        let obs = RelationObservation {
            pair: EntityPair::new("apple", "facebook").unwrap(),
            label: RelationLabel::Negative,
            score: 0.95,
            doc_id: "doc-1".into(),
            published_at: Utc::now(),
            context: None,
            method: Method::Zsc,
            display_names: ("Apple".into(), "Facebook".into()),
        };
        assert_eq!(obs.observation_id(), obs.observation_id());
        let mut other = obs.clone();
        other.label = RelationLabel::Positive;
        assert_ne!(obs.observation_id(), other.observation_id());
    }

    #[test]
    fn alias_table_round_trip_for_pipeline_ids() {
        let table = AliasTable::from_entities(vec![
            CanonicalEntity::new("apple", "Apple", [], Some("AAPL".into())),
            CanonicalEntity::new("facebook", "Facebook", ["Meta".to_string()], None),
        ])
        .unwrap();
        let m = MentionResult {
            surface: "Meta".into(),
            start: 0,
            end: 4,
            label: "ORG".into(),
            score: 0.9,
        };
        assert_eq!(table.resolve(&m).node_id(), "facebook");
    }
}
