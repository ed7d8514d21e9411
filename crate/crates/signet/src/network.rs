//! Signed network construction: aggregate observations into time-windowed
//! snapshots, diff snapshots around events, and export graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{DateTime, Duration, SecondsFormat, TimeZone, Utc};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::relations::{EntityPair, RelationLabel, RelationObservation};

/// Half-open UTC interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeWindow {
    start: DateTime<Utc>,
    end: DateTime<Utc>,
}

impl TimeWindow {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Result<Self> {
        if end <= start {
            return Err(Error::InvalidArgument(format!(
                "window end {end} must be after start {start}"
            )));
        }
        Ok(TimeWindow { start, end })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.end
    }

    pub fn contains(&self, at: DateTime<Utc>) -> bool {
        at >= self.start && at < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelTallies {
    pub positive: u64,
    pub negative: u64,
    pub neutral: u64,
    pub unknown: u64,
}

impl LabelTallies {
    fn bump(&mut self, label: RelationLabel) {
        match label {
            RelationLabel::Positive => self.positive += 1,
            RelationLabel::Negative => self.negative += 1,
            RelationLabel::Neutral => self.neutral += 1,
            RelationLabel::Unknown => self.unknown += 1,
        }
    }
}

/// Aggregated signed edge for one pair within one window.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedEdge {
    pub pair: EntityPair,
    /// Score-weighted mean sign in [-1, 1].
    pub weight: f64,
    pub tallies: LabelTallies,
    /// Sum of scores over the non-Unknown observations.
    pub score_sum: f64,
    /// Provenance: content ids of every underlying observation.
    pub observation_ids: Vec<String>,
}

impl SignedEdge {
    pub fn sign(&self, tau: f64) -> i8 {
        discretize_weight(self.weight, tau)
    }
}

pub fn discretize_weight(weight: f64, tau: f64) -> i8 {
    if weight.abs() < tau || weight == 0.0 {
        0
    } else if weight > 0.0 {
        1
    } else {
        -1
    }
}

/// Fold one pair's observations into an edge.
///
/// Each observation contributes its signed score (sign * score), averaged
/// with score weights: weight = sum(score_i * sign_i * score_i) /
/// sum(score_i). A lone observation therefore keeps its confidence as the
/// edge weight, and neutral observations pull the weight toward zero by
/// enlarging the denominator. Unknown observations count toward tallies and
/// provenance but contribute nothing; an all-Unknown (or empty) input
/// yields no edge. The fold sorts by observation id first, so any
/// permutation of the input produces an identical edge.
pub fn aggregate_edge(
    pair: &EntityPair,
    observations: &[&RelationObservation],
) -> Option<SignedEdge> {
    let mut tallies = LabelTallies::default();
    let mut ids: Vec<String> = Vec::with_capacity(observations.len());
    let mut weighted: Vec<(String, f64, f64)> = Vec::new();
    for obs in observations {
        debug_assert_eq!(&obs.pair, pair);
        tallies.bump(obs.label);
        let id = obs.observation_id();
        if let Some(sign) = obs.label.sign() {
            weighted.push((id.clone(), obs.score, sign));
        }
        ids.push(id);
    }
    if weighted.is_empty() {
        return None;
    }
    ids.sort();
    weighted.sort_by(|a, b| a.0.cmp(&b.0));
    let score_sum: f64 = weighted.iter().map(|(_, score, _)| score).sum();
    let numerator: f64 = weighted
        .iter()
        .map(|(_, score, sign)| score * sign * score)
        .sum();
    let mut weight = if score_sum > 0.0 { numerator / score_sum } else { 0.0 };
    if weight == 0.0 {
        weight = 0.0; // normalize -0.0
    }
    Some(SignedEdge {
        pair: pair.clone(),
        weight,
        tallies,
        score_sum,
        observation_ids: ids,
    })
}

/// The signed network over one time window.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub window: TimeWindow,
    pub nodes: BTreeSet<String>,
    /// Sorted by pair, unique per pair.
    pub edges: Vec<SignedEdge>,
}

impl NetworkSnapshot {
    pub fn edge(&self, pair: &EntityPair) -> Option<&SignedEdge> {
        self.edges.iter().find(|e| &e.pair == pair)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SnapshotOptions {
    /// Also include entities that appear only in Unknown-labeled
    /// observations (they would otherwise have no surviving edge).
    pub include_isolated: bool,
}

/// Aggregate the observations falling inside `window` into a snapshot.
pub fn build_snapshot(
    observations: &[RelationObservation],
    window: TimeWindow,
    options: SnapshotOptions,
) -> NetworkSnapshot {
    let mut by_pair: BTreeMap<&EntityPair, Vec<&RelationObservation>> = BTreeMap::new();
    for obs in observations {
        if window.contains(obs.published_at) {
            by_pair.entry(&obs.pair).or_default().push(obs);
        }
    }
    let mut nodes = BTreeSet::new();
    let mut edges = Vec::new();
    for (pair, group) in &by_pair {
        if let Some(edge) = aggregate_edge(pair, group) {
            nodes.insert(pair.a().to_string());
            nodes.insert(pair.b().to_string());
            edges.push(edge);
        } else if options.include_isolated {
            nodes.insert(pair.a().to_string());
            nodes.insert(pair.b().to_string());
        }
    }
    NetworkSnapshot {
        window,
        nodes,
        edges,
    }
}

/// A sequence of windowed snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalNetwork {
    pub snapshots: Vec<NetworkSnapshot>,
    pub window_length: Duration,
    pub stride: Duration,
}

/// Build snapshots on a stride-aligned grid covering every observation.
/// Window starts are floored to the stride grid (anchored at the epoch), so
/// the same observations always land in the same windows.
pub fn build_temporal(
    observations: &[RelationObservation],
    window_length: Duration,
    stride: Duration,
    options: SnapshotOptions,
) -> Result<TemporalNetwork> {
    if window_length <= Duration::zero() {
        return Err(Error::InvalidArgument("window length must be positive".into()));
    }
    if stride <= Duration::zero() {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    let mut network = TemporalNetwork {
        snapshots: Vec::new(),
        window_length,
        stride,
    };
    let Some(earliest) = observations.iter().map(|o| o.published_at).min() else {
        return Ok(network);
    };
    let latest = observations
        .iter()
        .map(|o| o.published_at)
        .max()
        .expect("non-empty");

    let stride_secs = stride.num_seconds();
    let first = earliest.timestamp() - earliest.timestamp().rem_euclid(stride_secs);
    let mut start = Utc.timestamp_opt(first, 0).single().expect("grid start in range");
    while start <= latest {
        let window = TimeWindow::new(start, start + window_length)?;
        network
            .snapshots
            .push(build_snapshot(observations, window, options));
        start += stride;
    }
    Ok(network)
}

/// Changes between two snapshots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SnapshotDiff {
    /// Edges present only in `after`.
    pub added: Vec<SignedEdge>,
    /// Edges present only in `before`.
    pub removed: Vec<SignedEdge>,
    /// Pairs present in both whose discretized sign changed.
    pub sign_flips: Vec<SignFlip>,
    /// Pairs present in both whose weight changed: pair -> (before, after).
    pub weight_deltas: BTreeMap<EntityPair, (f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignFlip {
    pub pair: EntityPair,
    pub before: i8,
    pub after: i8,
}

impl SnapshotDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty()
            && self.removed.is_empty()
            && self.sign_flips.is_empty()
            && self.weight_deltas.is_empty()
    }
}

/// Compare two snapshots. Signs are discretized at `tau` for flip
/// detection; collection order is deterministic by pair.
pub fn diff_snapshots(before: &NetworkSnapshot, after: &NetworkSnapshot, tau: f64) -> SnapshotDiff {
    let before_map: BTreeMap<&EntityPair, &SignedEdge> =
        before.edges.iter().map(|e| (&e.pair, e)).collect();
    let after_map: BTreeMap<&EntityPair, &SignedEdge> =
        after.edges.iter().map(|e| (&e.pair, e)).collect();

    let mut diff = SnapshotDiff::default();
    for (pair, edge) in &after_map {
        if !before_map.contains_key(*pair) {
            diff.added.push((*edge).clone());
        }
    }
    for (pair, edge) in &before_map {
        match after_map.get(*pair) {
            None => diff.removed.push((*edge).clone()),
            Some(after_edge) => {
                if edge.weight != after_edge.weight {
                    diff.weight_deltas
                        .insert((*pair).clone(), (edge.weight, after_edge.weight));
                }
                let sb = edge.sign(tau);
                let sa = after_edge.sign(tau);
                if sb != sa {
                    diff.sign_flips.push(SignFlip {
                        pair: (*pair).clone(),
                        before: sb,
                        after: sa,
                    });
                }
            }
        }
    }
    diff
}

/// Apply a diff to `before`, reconstructing `after`'s pair -> weight map.
pub fn apply_diff(before: &NetworkSnapshot, diff: &SnapshotDiff) -> BTreeMap<EntityPair, f64> {
    let removed: BTreeSet<&EntityPair> = diff.removed.iter().map(|e| &e.pair).collect();
    let mut weights: BTreeMap<EntityPair, f64> = before
        .edges
        .iter()
        .filter(|e| !removed.contains(&e.pair))
        .map(|e| (e.pair.clone(), e.weight))
        .collect();
    for edge in &diff.added {
        weights.insert(edge.pair.clone(), edge.weight);
    }
    for (pair, (_, after_weight)) in &diff.weight_deltas {
        weights.insert(pair.clone(), *after_weight);
    }
    weights
}

// -- export -----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Dot,
    GraphMl,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "dot" => Ok(ExportFormat::Dot),
            "graphml" => Ok(ExportFormat::GraphMl),
            other => Err(Error::InvalidArgument(format!(
                "unknown export format `{other}` (expected json|dot|graphml)"
            ))),
        }
    }
}

fn ts(at: DateTime<Utc>) -> String {
    at.to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn f6(value: f64) -> String {
    let rendered = format!("{value:.6}");
    if rendered == "-0.000000" {
        "0.000000".to_string()
    } else {
        rendered
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Canonical snapshot JSON: object keys sorted, floats at six decimal
/// places, byte-deterministic for a given snapshot.
pub fn snapshot_to_json(snapshot: &NetworkSnapshot) -> String {
    let mut out = String::new();
    out.push_str("{\"edges\":[");
    for (i, edge) in snapshot.edges.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(
            out,
            "{{\"a\":{},\"b\":{},\"observations\":[{}],\"score_sum\":{},\"tallies\":{{\"negative\":{},\"neutral\":{},\"positive\":{},\"unknown\":{}}},\"weight\":{}}}",
            json_string(edge.pair.a()),
            json_string(edge.pair.b()),
            edge.observation_ids
                .iter()
                .map(|id| json_string(id))
                .collect::<Vec<_>>()
                .join(","),
            f6(edge.score_sum),
            edge.tallies.negative,
            edge.tallies.neutral,
            edge.tallies.positive,
            edge.tallies.unknown,
            f6(edge.weight),
        );
    }
    out.push_str("],\"nodes\":[");
    out.push_str(
        &snapshot
            .nodes
            .iter()
            .map(|n| json_string(n))
            .collect::<Vec<_>>()
            .join(","),
    );
    let _ = write!(
        out,
        "],\"window\":{{\"end\":{},\"start\":{}}}}}",
        json_string(&ts(snapshot.window.end)),
        json_string(&ts(snapshot.window.start)),
    );
    out
}

fn sign_word(weight: f64) -> &'static str {
    if weight > 0.0 {
        "positive"
    } else if weight < 0.0 {
        "negative"
    } else {
        "neutral"
    }
}

fn dot_style(weight: f64) -> &'static str {
    if weight > 0.0 {
        "solid"
    } else if weight < 0.0 {
        "dashed"
    } else {
        "dotted"
    }
}

fn snapshot_to_dot(snapshot: &NetworkSnapshot) -> String {
    let mut out = String::from("graph snapshot {\n");
    for node in &snapshot.nodes {
        let _ = writeln!(out, "  \"{}\";", node.replace('"', "\\\""));
    }
    for edge in &snapshot.edges {
        let _ = writeln!(
            out,
            "  \"{}\" -- \"{}\" [weight={}, style={}];",
            edge.pair.a().replace('"', "\\\""),
            edge.pair.b().replace('"', "\\\""),
            f6(edge.weight),
            dot_style(edge.weight),
        );
    }
    out.push_str("}\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn snapshot_to_graphml(snapshot: &NetworkSnapshot) -> String {
    let mut out = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n\
         \x20\x20<key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n\
         \x20\x20<key id=\"sign\" for=\"edge\" attr.name=\"sign\" attr.type=\"string\"/>\n\
         \x20\x20<graph id=\"snapshot\" edgedefault=\"undirected\">\n",
    );
    for node in &snapshot.nodes {
        let _ = writeln!(out, "    <node id=\"{}\"/>", xml_escape(node));
    }
    for edge in &snapshot.edges {
        let _ = writeln!(
            out,
            "    <edge source=\"{}\" target=\"{}\">\n      <data key=\"weight\">{}</data>\n      <data key=\"sign\">{}</data>\n    </edge>",
            xml_escape(edge.pair.a()),
            xml_escape(edge.pair.b()),
            f6(edge.weight),
            sign_word(edge.weight),
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// Serialize a snapshot. JSON is the canonical form and round-trips through
/// `snapshot_from_json`; DOT and GraphML carry the weight as an edge
/// attribute and the sign as a style attribute. All three are
/// byte-deterministic.
pub fn export_snapshot(snapshot: &NetworkSnapshot, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => {
            let mut s = snapshot_to_json(snapshot);
            s.push('\n');
            s.into_bytes()
        }
        ExportFormat::Dot => snapshot_to_dot(snapshot).into_bytes(),
        ExportFormat::GraphMl => snapshot_to_graphml(snapshot).into_bytes(),
    }
}

#[derive(Deserialize)]
struct JsonSnapshot {
    edges: Vec<JsonEdge>,
    nodes: Vec<String>,
    window: JsonWindow,
}

#[derive(Deserialize)]
struct JsonEdge {
    a: String,
    b: String,
    observations: Vec<String>,
    score_sum: f64,
    tallies: JsonTallies,
    weight: f64,
}

#[derive(Deserialize)]
struct JsonTallies {
    negative: u64,
    neutral: u64,
    positive: u64,
    unknown: u64,
}

#[derive(Deserialize)]
struct JsonWindow {
    end: String,
    start: String,
}

/// Parse the canonical JSON form back into a snapshot.
pub fn snapshot_from_json(bytes: &[u8]) -> Result<NetworkSnapshot> {
    let parsed: JsonSnapshot = serde_json::from_slice(bytes)
        .map_err(|e| Error::InvalidArgument(format!("bad snapshot json: {e}")))?;
    let start = DateTime::parse_from_rfc3339(&parsed.window.start)
        .map_err(|e| Error::InvalidArgument(format!("bad window start: {e}")))?
        .with_timezone(&Utc);
    let end = DateTime::parse_from_rfc3339(&parsed.window.end)
        .map_err(|e| Error::InvalidArgument(format!("bad window end: {e}")))?
        .with_timezone(&Utc);
    let window = TimeWindow::new(start, end)?;
    let mut edges = Vec::with_capacity(parsed.edges.len());
    for e in parsed.edges {
        edges.push(SignedEdge {
            pair: EntityPair::new(e.a, e.b)?,
            weight: e.weight,
            tallies: LabelTallies {
                positive: e.tallies.positive,
                negative: e.tallies.negative,
                neutral: e.tallies.neutral,
                unknown: e.tallies.unknown,
            },
            score_sum: e.score_sum,
            observation_ids: e.observations,
        });
    }
    edges.sort_by(|x, y| x.pair.cmp(&y.pair));
    Ok(NetworkSnapshot {
        window,
        nodes: parsed.nodes.into_iter().collect(),
        edges,
    })
}
