//! Acceptance suite: one test per release criterion, each printing a
//! pass line and enforcing its runtime budget. Everything runs offline
//! against the shipped replay fixtures.

mod common;

use std::collections::BTreeMap;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use proptest::prelude::*;

use signet::balance::{predict_edge_sign, triad_census, DiscretizedGraph, PredictedSign, TriadKind};
use signet::entities::AliasTable;
use signet::explain::parse_llm_relations;
use signet::gateway::{BackendConfig, Capability, Mode, Transport};
use signet::ingest::{load_corpus, OnError};
use signet::network::{
    aggregate_edge, apply_diff, build_snapshot, diff_snapshots, export_snapshot,
    snapshot_from_json, ExportFormat, SnapshotOptions, TimeWindow,
};
use signet::relations::{EntityPair, Method, RelationLabel, RelationObservation};
use signet::run::run_pipeline;

fn budget(start: Instant, limit: Duration, what: &str) {
    let elapsed = start.elapsed();
    assert!(
        elapsed < limit,
        "{what} took {elapsed:?}, budget {limit:?}"
    );
}

fn golden_window() -> TimeWindow {
    TimeWindow::new(
        Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap(),
        Utc.with_ymd_and_hms(2022, 6, 1, 0, 0, 0).unwrap(),
    )
    .unwrap()
}

fn event_date() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2022, 4, 15, 0, 0, 0).unwrap()
}

fn replay_zsc_observations(out: &std::path::Path) -> Vec<RelationObservation> {
    let config = common::replay_config(out);
    let gateway = config.build_gateway().unwrap();
    run_pipeline(&config, &gateway).unwrap();
    signet::relations::read_observations(&out.join("observations.zsc.jsonl")).unwrap()
}

/// Criterion 1: the golden replay run reproduces the recorded
/// classifications exactly: every (pair, label, score) the source table
/// publishes, in (corpus, pair) order, and nothing else.
#[test]
fn acceptance_1_golden_run_matches_recorded_classifications() {
    let start = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let config = common::replay_config(out.path());
    let gateway = config.build_gateway().unwrap();
    let report = run_pipeline(&config, &gateway).unwrap();

    assert_eq!(report.counts.items_loaded, 4);
    assert_eq!(report.counts.items_kept, 4);

    let observations =
        signet::relations::read_observations(&out.path().join("observations.zsc.jsonl")).unwrap();
    let got: Vec<(String, String, RelationLabel, f64)> = observations
        .iter()
        .map(|o| {
            (
                o.pair.a().to_string(),
                o.pair.b().to_string(),
                o.label,
                o.score,
            )
        })
        .collect();
    let expected: Vec<(String, String, RelationLabel, f64)> = vec![
        ("facebook".into(), "tiktok".into(), RelationLabel::Negative, 0.98),
        ("apple".into(), "facebook".into(), RelationLabel::Negative, 0.95),
        ("apple".into(), "facebook".into(), RelationLabel::Negative, 0.96),
        ("apple".into(), "google".into(), RelationLabel::Positive, 0.54),
        ("apple".into(), "snap".into(), RelationLabel::Negative, 0.97),
        ("apple".into(), "facebook".into(), RelationLabel::Negative, 0.70),
        ("apple".into(), "google".into(), RelationLabel::Neutral, 0.46),
        ("facebook".into(), "google".into(), RelationLabel::Negative, 0.64),
    ];
    assert_eq!(got, expected, "golden observations differ");
    // the report counts agree with the files
    assert_eq!(report.counts.zsc_observations, expected.len());
    // unpublished pairs surface as recorded misses, not invented data
    assert!(report
        .issues
        .iter()
        .all(|i| i.stage == "zsc:classify" && i.message.contains("replay miss")));
    assert_eq!(report.issues.len(), 5);

    budget(start, Duration::from_secs(5), "criterion 1");
    println!("acceptance 1 PASS: golden run reproduces all 8 recorded (pair, label, score) tuples");
}

/// Criterion 2: the four recorded explanation texts parse into exactly the
/// published pair/label tuples.
#[test]
fn acceptance_2_golden_explanations_parse_exactly() {
    let start = Instant::now();
    let table = AliasTable::load(&common::fixtures_dir().join("aliases.json")).unwrap();
    let corpus = load_corpus(
        &common::fixtures_dir().join("golden_corpus.jsonl"),
        OnError::Fail,
    )
    .unwrap()
    .corpus;

    let mut got: Vec<(String, String, RelationLabel)> = Vec::new();
    for (headline, explanation) in common::golden_explanations() {
        let item = corpus
            .items()
            .iter()
            .find(|i| i.headline == headline)
            .expect("headline in corpus");
        let parsed = parse_llm_relations(explanation, item, &table);
        assert!(
            parsed.diagnostics.is_empty(),
            "unexpected diagnostics: {:?}",
            parsed.diagnostics
        );
        got.extend(
            parsed
                .explanations
                .iter()
                .map(|e| (e.pair.a().to_string(), e.pair.b().to_string(), e.label)),
        );
    }

    let expected: Vec<(String, String, RelationLabel)> = vec![
        ("facebook".into(), "gop-firm".into(), RelationLabel::Positive),
        ("facebook".into(), "tiktok".into(), RelationLabel::Negative),
        ("gop-firm".into(), "tiktok".into(), RelationLabel::Negative),
        ("apple".into(), "facebook".into(), RelationLabel::Negative),
        ("apple".into(), "snap".into(), RelationLabel::Negative),
        ("apple".into(), "facebook".into(), RelationLabel::Negative),
        ("apple".into(), "google".into(), RelationLabel::Positive),
        ("apple".into(), "facebook".into(), RelationLabel::Negative),
        ("facebook".into(), "google".into(), RelationLabel::Negative),
        ("apple".into(), "google".into(), RelationLabel::Unknown),
    ];
    assert_eq!(got, expected);
    assert_eq!(got.len(), 10);

    budget(start, Duration::from_secs(1), "criterion 2");
    println!("acceptance 2 PASS: 10/10 (pair, label) tuples recovered from the recorded explanations");
}

fn arbitrary_observation() -> impl Strategy<Value = RelationObservation> {
    let label = prop_oneof![
        Just(RelationLabel::Positive),
        Just(RelationLabel::Negative),
        Just(RelationLabel::Neutral),
        Just(RelationLabel::Unknown),
    ];
    (label, 0.0f64..=1.0, 0u32..1000, 0i64..10_000_000).prop_map(|(label, score, doc, at)| {
        RelationObservation {
            pair: EntityPair::new("alpha", "beta").unwrap(),
            label,
            score: (score * 1e6).round() / 1e6,
            doc_id: format!("doc-{doc}"),
            published_at: Utc.timestamp_opt(1_600_000_000 + at, 0).unwrap(),
            context: None,
            method: Method::Zsc,
            display_names: ("Alpha".into(), "Beta".into()),
        }
    })
}

fn flip_label(label: RelationLabel) -> RelationLabel {
    match label {
        RelationLabel::Positive => RelationLabel::Negative,
        RelationLabel::Negative => RelationLabel::Positive,
        other => other,
    }
}

/// Criterion 3: randomized aggregation properties, 1000+ cases each.
#[test]
fn acceptance_3_aggregation_properties() {
    let start = Instant::now();
    let pair = EntityPair::new("alpha", "beta").unwrap();

    let config = ProptestConfig {
        cases: 1000,
        ..ProptestConfig::default()
    };

    // weight bounds and the no-edge condition
    proptest!(config.clone(), |(observations in proptest::collection::vec(arbitrary_observation(), 0..24))| {
        let refs: Vec<&RelationObservation> = observations.iter().collect();
        match aggregate_edge(&pair, &refs) {
            Some(edge) => {
                prop_assert!(edge.weight >= -1.0 && edge.weight <= 1.0);
                prop_assert!(edge.score_sum >= 0.0);
                prop_assert_eq!(edge.observation_ids.len(), observations.len());
                let non_unknown = observations
                    .iter()
                    .filter(|o| o.label != RelationLabel::Unknown)
                    .count();
                prop_assert!(non_unknown >= 1);
            }
            None => {
                prop_assert!(observations
                    .iter()
                    .all(|o| o.label == RelationLabel::Unknown));
            }
        }
    });

    // label-flip antisymmetry
    proptest!(config.clone(), |(observations in proptest::collection::vec(arbitrary_observation(), 1..24))| {
        let refs: Vec<&RelationObservation> = observations.iter().collect();
        let flipped: Vec<RelationObservation> = observations
            .iter()
            .map(|o| {
                let mut f = o.clone();
                f.label = flip_label(o.label);
                f
            })
            .collect();
        let flipped_refs: Vec<&RelationObservation> = flipped.iter().collect();
        match (aggregate_edge(&pair, &refs), aggregate_edge(&pair, &flipped_refs)) {
            (Some(edge), Some(anti)) => {
                prop_assert!((edge.weight + anti.weight).abs() < 1e-12,
                    "flip must negate: {} vs {}", edge.weight, anti.weight);
            }
            (None, None) => {}
            (a, b) => prop_assert!(false, "edge existence must be flip-invariant: {a:?} vs {b:?}"),
        }
    });

    // permutation invariance
    proptest!(config, |(observations in proptest::collection::vec(arbitrary_observation(), 1..16).prop_shuffle().prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())))| {
        let (original, shuffled) = observations;
        let refs_a: Vec<&RelationObservation> = original.iter().collect();
        let refs_b: Vec<&RelationObservation> = shuffled.iter().collect();
        let a = aggregate_edge(&pair, &refs_a);
        let b = aggregate_edge(&pair, &refs_b);
        prop_assert_eq!(a, b);
    });

    budget(start, Duration::from_secs(10), "criterion 3");
    println!("acceptance 3 PASS: aggregation properties hold on 3000 randomized cases");
}

// -- criterion 4: independent balance oracles ------------------------------

const N5: usize = 5;
const NODE_NAMES: [&str; N5] = ["a", "b", "c", "d", "e"];

/// All node pairs of an n-clique, in (i, j) index form.
fn pair_slots(n: usize) -> Vec<(usize, usize)> {
    let mut slots = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            slots.push((i, j));
        }
    }
    slots
}

/// Oracle 1: O(n^3) triple scan over an adjacency matrix.
fn census_oracle(matrix: &[[i8; N5]; N5], n: usize) -> [u64; 4] {
    let mut counts = [0u64; 4];
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (ij, ik, jk) = (matrix[i][j], matrix[i][k], matrix[j][k]);
                if ij != 0 && ik != 0 && jk != 0 {
                    let negatives = [ij, ik, jk].iter().filter(|s| **s == -1).count();
                    counts[negatives] += 1;
                }
            }
        }
    }
    counts
}

/// Oracle 2: direct vote count over the adjacency matrix.
#[allow(clippy::needless_range_loop)]
fn predict_oracle(matrix: &[[i8; N5]; N5], n: usize, a: usize, b: usize) -> (u32, u32) {
    let mut positive = 0;
    let mut negative = 0;
    for k in 0..n {
        if k == a || k == b {
            continue;
        }
        let (sa, sb) = (matrix[a][k], matrix[b][k]);
        if sa != 0 && sb != 0 {
            if sa * sb > 0 {
                positive += 1;
            } else {
                negative += 1;
            }
        }
    }
    (positive, negative)
}

fn check_all_graphs(n: usize) -> u64 {
    let slots = pair_slots(n);
    let assignments = 3u64.pow(slots.len() as u32);
    for code in 0..assignments {
        let mut matrix = [[0i8; N5]; N5];
        let mut graph = DiscretizedGraph::default();
        let mut digits = code;
        for (i, j) in &slots {
            let sign = match digits % 3 {
                0 => 0i8,
                1 => 1,
                _ => -1,
            };
            digits /= 3;
            if sign != 0 {
                matrix[*i][*j] = sign;
                matrix[*j][*i] = sign;
                graph.insert(
                    EntityPair::new(NODE_NAMES[*i], NODE_NAMES[*j]).unwrap(),
                    sign,
                );
            }
        }

        // census equivalence
        let census = triad_census(&graph);
        let oracle = census_oracle(&matrix, n);
        let got = [
            census.get(TriadKind::AllPositive),
            census.get(TriadKind::OneNegative),
            census.get(TriadKind::TwoNegative),
            census.get(TriadKind::AllNegative),
        ];
        assert_eq!(got, oracle, "census mismatch on graph {code} (n={n})");

        // prediction equivalence on every non-edge
        for (i, j) in &slots {
            if matrix[*i][*j] != 0 {
                continue;
            }
            let pair = EntityPair::new(NODE_NAMES[*i], NODE_NAMES[*j]).unwrap();
            let prediction = predict_edge_sign(&graph, &pair).unwrap();
            let (positive, negative) = predict_oracle(&matrix, n, *i, *j);
            assert_eq!(
                prediction.votes,
                (positive, negative),
                "vote mismatch on graph {code} (n={n})"
            );
            let expected = match positive.cmp(&negative) {
                std::cmp::Ordering::Greater => PredictedSign::Positive,
                std::cmp::Ordering::Less => PredictedSign::Negative,
                std::cmp::Ordering::Equal => PredictedSign::Unknown,
            };
            assert_eq!(prediction.predicted, expected);
        }
    }
    assignments
}

/// Criterion 4: triad census and edge prediction agree with brute-force
/// oracles on every signed graph over up to 5 nodes (exhaustive
/// absent/+/- assignment of all 10 edge slots: 3^10 graphs for n=5).
#[test]
fn acceptance_4_balance_oracle_equivalence() {
    let start = Instant::now();
    let mut total = 0;
    for n in 3..=5 {
        total += check_all_graphs(n);
    }
    assert_eq!(total, 27 + 729 + 59_049);
    budget(start, Duration::from_secs(60), "criterion 4");
    println!("acceptance 4 PASS: census and prediction match oracles on {total} graphs");
}

/// Criterion 5: splitting the golden corpus at the configured event date
/// yields a diff whose added edges carry the published signs.
#[test]
fn acceptance_5_event_diff() {
    let start = Instant::now();
    let out = tempfile::tempdir().unwrap();
    let observations = replay_zsc_observations(out.path());

    let before_window = TimeWindow::new(golden_window().start(), event_date()).unwrap();
    let after_window = TimeWindow::new(event_date(), golden_window().end()).unwrap();
    let before = build_snapshot(&observations, before_window, SnapshotOptions::default());
    let after = build_snapshot(&observations, after_window, SnapshotOptions::default());

    let diff = diff_snapshots(&before, &after, 0.1);
    let added: BTreeMap<&EntityPair, f64> =
        diff.added.iter().map(|e| (&e.pair, e.weight)).collect();

    let apple_facebook = EntityPair::new("apple", "facebook").unwrap();
    let apple_snap = EntityPair::new("apple", "snap").unwrap();
    let apple_google = EntityPair::new("apple", "google").unwrap();
    assert!(added[&apple_facebook] < 0.0, "apple-facebook must appear negative");
    assert!(added[&apple_snap] < 0.0, "apple-snap must appear negative");
    assert!(added[&apple_google] > 0.0, "apple-google must appear positive");

    // identity diff is empty
    assert!(diff_snapshots(&after, &after, 0.1).is_empty());

    // round-trip: applying the diff to `before` reconstructs `after`
    let reconstructed = apply_diff(&before, &diff);
    let expected: BTreeMap<EntityPair, f64> = after
        .edges
        .iter()
        .map(|e| (e.pair.clone(), e.weight))
        .collect();
    assert_eq!(reconstructed, expected);

    budget(start, Duration::from_secs(5), "criterion 5");
    println!("acceptance 5 PASS: event diff adds apple-facebook(-), apple-snap(-), apple-google(+); identity empty; round-trip exact");
}

/// Criterion 6: byte determinism and round-trips.
#[test]
fn acceptance_6_determinism_and_round_trips() {
    let start = Instant::now();

    let out_a = tempfile::tempdir().unwrap();
    let out_b = tempfile::tempdir().unwrap();
    for out in [&out_a, &out_b] {
        let config = common::replay_config(out.path());
        let gateway = config.build_gateway().unwrap();
        run_pipeline(&config, &gateway).unwrap();
    }
    for name in [
        "observations.jsonl",
        "observations.zsc.jsonl",
        "observations.llm.jsonl",
        "explanations.jsonl",
        "network.json",
        "snapshot-000.json",
        "snapshot-001.json",
    ] {
        let a = std::fs::read(out_a.path().join(name)).unwrap();
        let b = std::fs::read(out_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical replay runs");
        assert!(!a.is_empty(), "{name} must not be empty");
    }

    // canonical JSON round-trips structurally
    let observations = signet::relations::read_observations(
        &out_a.path().join("observations.zsc.jsonl"),
    )
    .unwrap();
    let snapshot = build_snapshot(&observations, golden_window(), SnapshotOptions::default());
    let json = export_snapshot(&snapshot, ExportFormat::Json);
    let parsed = snapshot_from_json(&json).unwrap();
    assert_eq!(json, export_snapshot(&parsed, ExportFormat::Json));
    assert_eq!(parsed.nodes, snapshot.nodes);
    assert_eq!(parsed.edges.len(), snapshot.edges.len());

    // exports match the pinned goldens byte for byte
    let golden_dir = common::manifest_dir().join("tests/golden");
    for (format, name) in [
        (ExportFormat::Json, "snapshot.json"),
        (ExportFormat::Dot, "snapshot.dot"),
        (ExportFormat::GraphMl, "snapshot.graphml"),
    ] {
        let golden = std::fs::read(golden_dir.join(name)).unwrap();
        assert_eq!(
            export_snapshot(&snapshot, format),
            golden,
            "{name} diverged from the pinned golden"
        );
    }

    budget(start, Duration::from_secs(10), "criterion 6");
    println!("acceptance 6 PASS: replay runs byte-identical; json round-trips; dot/graphml/json match goldens");
}

/// Criterion 7: gateway contract. Replay performs zero network calls;
/// retry counts never exceed the configured budget under injected failures.
#[test]
fn acceptance_7_gateway_contract() {
    let start = Instant::now();

    // replay run with an instrumented transport: zero sends
    let out = tempfile::tempdir().unwrap();
    let config = common::replay_config(out.path());
    let (gateway, transport) = common::replay_gateway_counting(&config);
    run_pipeline(&config, &gateway).unwrap();
    assert_eq!(
        transport.calls.load(Ordering::SeqCst),
        0,
        "replay mode must not touch the network"
    );

    // injected failures: attempts == max_retries + 1, never more
    struct AlwaysFail(std::sync::atomic::AtomicUsize);
    impl Transport for AlwaysFail {
        fn send(
            &self,
            _req: &signet::gateway::TransportRequest<'_>,
        ) -> Result<Vec<u8>, signet::gateway::TransportError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Err(signet::gateway::TransportError::new(
                signet::gateway::TransportErrorKind::Timeout,
                "injected",
            ))
        }
    }
    for max_retries in [0u32, 1, 3] {
        let failing = Arc::new(AlwaysFail(std::sync::atomic::AtomicUsize::new(0)));
        let mut cfg = BackendConfig::new("http://models.test/zsc", "m", Mode::Live);
        cfg.max_retries = max_retries;
        cfg.backoff.base = std::time::Duration::from_micros(10);
        let backend = signet::gateway::Backend::new(
            Capability::Zsc,
            cfg,
            failing.clone(),
            None,
        )
        .unwrap()
        .with_sleeper(|_| {});
        let err = backend
            .zsc("premise", "this is {}.", &["x".to_string()])
            .unwrap_err();
        assert_eq!(
            failing.0.load(Ordering::SeqCst) as u32,
            max_retries + 1,
            "attempts must be retries + 1"
        );
        match err {
            signet::Error::Backend { attempts, .. } => assert_eq!(attempts, max_retries + 1),
            other => panic!("expected backend error, got {other:?}"),
        }
    }

    budget(start, Duration::from_secs(5), "criterion 7");
    println!("acceptance 7 PASS: zero network calls in replay; retries capped at budget");
}
