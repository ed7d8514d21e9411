//! End-to-end workflow: configuration, orchestration of both pipelines,
//! output files, and the run report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use chrono::Duration;
use serde::Serialize;

use crate::digest::canonical_digest;
use crate::entities::AliasTable;
use crate::error::{Error, Result};
use crate::explain::{
    run_llm_pipeline, write_explanations, write_summaries, LlmPipelineOptions, ScorePolicy,
};
use crate::gateway::{
    Backend, BackendConfig, Capability, FixtureStore, Gateway, HttpTransport, Mode, Transport,
    DEFAULT_LLM_MODEL, DEFAULT_NER_MODEL, DEFAULT_ZSC_MODEL,
};
use crate::ingest::{load_corpus, OnError, StockFilterConfig};
use crate::network::{build_temporal, export_snapshot, ExportFormat, SnapshotOptions};
use crate::relations::{
    run_zsc_pipeline, write_observations, ClassSet, ContextOptions, ErrorPolicy,
    HypothesisTemplate, RelationObservation, ZscPipelineOptions,
};

/// Parse durations like `30d`, `12h`, `90m`, `45s`, or bare seconds.
pub fn parse_duration(s: &str) -> Result<Duration> {
    let s = s.trim();
    let (digits, unit) = match s.find(|c: char| !c.is_ascii_digit()) {
        Some(split) => s.split_at(split),
        None => (s, "s"),
    };
    let value: i64 = digits
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad duration `{s}`")))?;
    if value <= 0 {
        return Err(Error::InvalidArgument(format!(
            "duration must be positive: `{s}`"
        )));
    }
    match unit.trim() {
        "d" => Ok(Duration::days(value)),
        "h" => Ok(Duration::hours(value)),
        "m" => Ok(Duration::minutes(value)),
        "s" | "" => Ok(Duration::seconds(value)),
        other => Err(Error::InvalidArgument(format!(
            "unknown duration unit `{other}` in `{s}`"
        ))),
    }
}

pub fn format_duration(d: Duration) -> String {
    let secs = d.num_seconds();
    if secs % 86_400 == 0 {
        format!("{}d", secs / 86_400)
    } else if secs % 3600 == 0 {
        format!("{}h", secs / 3600)
    } else if secs % 60 == 0 {
        format!("{}m", secs / 60)
    } else {
        format!("{secs}s")
    }
}

/// Per-capability endpoint settings.
#[derive(Debug, Clone, Serialize)]
pub struct EndpointSettings {
    pub endpoint: String,
    pub model: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl EndpointSettings {
    fn with_model(model: &str) -> Self {
        EndpointSettings {
            endpoint: String::new(),
            model: model.to_string(),
            timeout_ms: 30_000,
            max_retries: 3,
            max_in_flight: 4,
        }
    }
}

/// Everything one run needs. Defaults are pinned here; a config file and
/// CLI flags override them (flags win).
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub alias_table: PathBuf,
    /// Directory holding `ner.jsonl` / `zsc.jsonl` / `llm.jsonl`.
    pub fixtures: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(serialize_with = "serialize_mode")]
    pub mode: Mode,
    pub ner: EndpointSettings,
    pub zsc: EndpointSettings,
    pub llm: EndpointSettings,
    #[serde(serialize_with = "serialize_classes")]
    pub classes: ClassSet,
    pub context: bool,
    pub context_topics: Vec<String>,
    #[serde(serialize_with = "serialize_duration")]
    pub window: Duration,
    #[serde(serialize_with = "serialize_duration")]
    pub stride: Duration,
    pub tau: f64,
    pub llm_score: f64,
    pub stock_threshold: f64,
    pub include_unresolved: bool,
    pub include_isolated: bool,
    pub use_summary: bool,
    pub summaries: bool,
    pub zsc_pipeline: bool,
    pub llm_pipeline: bool,
    #[serde(serialize_with = "serialize_policy")]
    pub on_error: ErrorPolicy,
    #[serde(serialize_with = "serialize_on_load")]
    pub on_load_error: OnError,
}

fn serialize_mode<S: serde::Serializer>(mode: &Mode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(mode.as_str())
}

fn serialize_classes<S: serde::Serializer>(
    classes: &ClassSet,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match classes {
        ClassSet::Three => "3",
        ClassSet::Four => "4",
    })
}

fn serialize_duration<S: serde::Serializer>(
    d: &Duration,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format_duration(*d))
}

fn serialize_policy<S: serde::Serializer>(
    p: &ErrorPolicy,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match p {
        ErrorPolicy::FailFast => "fail-fast",
        ErrorPolicy::Skip => "skip",
    })
}

fn serialize_on_load<S: serde::Serializer>(
    p: &OnError,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(match p {
        OnError::Fail => "fail",
        OnError::Skip => "skip",
    })
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: PathBuf::new(),
            alias_table: PathBuf::new(),
            fixtures: None,
            out_dir: PathBuf::from("out"),
            mode: Mode::Replay,
            ner: EndpointSettings::with_model(DEFAULT_NER_MODEL),
            zsc: EndpointSettings::with_model(DEFAULT_ZSC_MODEL),
            llm: EndpointSettings::with_model(DEFAULT_LLM_MODEL),
            classes: ClassSet::Three,
            context: false,
            context_topics: ContextOptions::default().topic_labels,
            window: Duration::days(30),
            stride: Duration::days(30),
            tau: 0.1,
            llm_score: 1.0,
            stock_threshold: 0.5,
            include_unresolved: true,
            include_isolated: false,
            use_summary: false,
            summaries: false,
            zsc_pipeline: true,
            llm_pipeline: true,
            on_error: ErrorPolicy::Skip,
            on_load_error: OnError::Skip,
        }
    }
}

impl RunConfig {
    /// Load a plain-text `key = value` config file. Relative paths resolve
    /// against the file's directory. Unknown keys are usage errors.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut config = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", idx + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            config.set(key.trim(), value.trim(), Some(base))?;
        }
        Ok(config)
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path_of = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            match (p.is_relative(), base) {
                (true, Some(base)) => base.join(p),
                _ => p,
            }
        };
        let parse_bool = |v: &str| -> Result<bool> {
            match v {
                "true" | "on" | "1" | "yes" => Ok(true),
                "false" | "off" | "0" | "no" => Ok(false),
                other => Err(Error::config(key, format!("expected boolean, got `{other}`"))),
            }
        };
        let parse_fraction = |v: &str| -> Result<f64> {
            let f: f64 = v
                .parse()
                .map_err(|_| Error::config(key, format!("expected number, got `{v}`")))?;
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(key, format!("{f} is outside [0,1]")));
            }
            Ok(f)
        };
        match key {
            "corpus" => self.corpus = path_of(value),
            "alias_table" => self.alias_table = path_of(value),
            "fixtures" => self.fixtures = Some(path_of(value)),
            "out_dir" => self.out_dir = path_of(value),
            "mode" => self.mode = value.parse()?,
            "classes" => self.classes = value.parse()?,
            "context" => self.context = parse_bool(value)?,
            "context_topics" => {
                self.context_topics = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "window" => self.window = parse_duration(value)?,
            "stride" => self.stride = parse_duration(value)?,
            "tau" => self.tau = parse_fraction(value)?,
            "llm_score" => self.llm_score = parse_fraction(value)?,
            "stock_threshold" => self.stock_threshold = parse_fraction(value)?,
            "include_unresolved" => self.include_unresolved = parse_bool(value)?,
            "include_isolated" => self.include_isolated = parse_bool(value)?,
            "use_summary" => self.use_summary = parse_bool(value)?,
            "summaries" => self.summaries = parse_bool(value)?,
            "zsc_pipeline" => self.zsc_pipeline = parse_bool(value)?,
            "llm_pipeline" => self.llm_pipeline = parse_bool(value)?,
            "on_error" => self.on_error = value.parse()?,
            "on_load_error" => self.on_load_error = value.parse()?,
            "ner_endpoint" => self.ner.endpoint = value.to_string(),
            "ner_model" => self.ner.model = value.to_string(),
            "zsc_endpoint" => self.zsc.endpoint = value.to_string(),
            "zsc_model" => self.zsc.model = value.to_string(),
            "llm_endpoint" => self.llm.endpoint = value.to_string(),
            "llm_model" => self.llm.model = value.to_string(),
            "timeout_ms" => {
                let ms: u64 = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected integer, got `{value}`")))?;
                self.ner.timeout_ms = ms;
                self.zsc.timeout_ms = ms;
                self.llm.timeout_ms = ms;
            }
            "max_retries" => {
                let n: u32 = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected integer, got `{value}`")))?;
                self.ner.max_retries = n;
                self.zsc.max_retries = n;
                self.llm.max_retries = n;
            }
            "max_in_flight" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| Error::config(key, format!("expected integer, got `{value}`")))?;
                if n < 1 {
                    return Err(Error::config(key, "must be at least 1"));
                }
                self.ner.max_in_flight = n;
                self.zsc.max_in_flight = n;
                self.llm.max_in_flight = n;
            }
            unknown => {
                return Err(Error::config(
                    unknown,
                    "unknown configuration key".to_string(),
                ))
            }
        }
        Ok(())
    }

    /// `SIGNET_<CAP>_ENDPOINT` / `SIGNET_<CAP>_MODEL` environment overrides.
    pub fn apply_env(&mut self) {
        for (capability, settings) in [
            (Capability::Ner, &mut self.ner),
            (Capability::Zsc, &mut self.zsc),
            (Capability::Llm, &mut self.llm),
        ] {
            if let Ok(endpoint) = std::env::var(capability.endpoint_env()) {
                settings.endpoint = endpoint;
            }
            if let Ok(model) = std::env::var(capability.model_env()) {
                settings.model = model;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.as_os_str().is_empty() {
            return Err(Error::config("corpus", "path is required"));
        }
        if self.alias_table.as_os_str().is_empty() {
            return Err(Error::config("alias_table", "path is required"));
        }
        self.validate_backends()
    }

    /// The parts of validation a gateway needs, without requiring the
    /// corpus/alias-table paths (not every command reads them).
    pub fn validate_backends(&self) -> Result<()> {
        match self.mode {
            Mode::Replay | Mode::Record => {
                if self.fixtures.is_none() {
                    return Err(Error::config(
                        "fixtures",
                        format!("{} mode requires a fixtures directory", self.mode.as_str()),
                    ));
                }
            }
            Mode::Live => {}
        }
        if matches!(self.mode, Mode::Record | Mode::Live) {
            for (name, settings) in [("ner", &self.ner), ("zsc", &self.zsc), ("llm", &self.llm)] {
                if settings.endpoint.is_empty() {
                    return Err(Error::config(
                        format!("{name}_endpoint"),
                        format!("{} mode requires a live endpoint", self.mode.as_str()),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Deterministic digest identifying this configuration.
    pub fn digest(&self) -> String {
        canonical_digest(self)
    }

    fn backend_config(&self, settings: &EndpointSettings) -> BackendConfig {
        let mut cfg = BackendConfig::new(settings.endpoint.clone(), settings.model.clone(), self.mode);
        cfg.timeout = std::time::Duration::from_millis(settings.timeout_ms);
        cfg.max_retries = settings.max_retries;
        cfg.max_in_flight = settings.max_in_flight;
        cfg
    }

    fn fixture_path(&self, capability: Capability) -> Option<PathBuf> {
        self.fixtures
            .as_ref()
            .map(|dir| dir.join(format!("{}.jsonl", capability.as_str())))
    }

    /// Build the gateway this config describes, over HTTP transports.
    pub fn build_gateway(&self) -> Result<Gateway> {
        self.validate_backends()?;
        let mut backends = Vec::with_capacity(3);
        for (capability, settings) in [
            (Capability::Ner, &self.ner),
            (Capability::Zsc, &self.zsc),
            (Capability::Llm, &self.llm),
        ] {
            let cfg = self.backend_config(settings);
            let transport: Arc<dyn Transport> = Arc::new(HttpTransport::new(cfg.timeout));
            backends.push(self.build_backend(capability, cfg, transport)?);
        }
        let mut it = backends.into_iter();
        Ok(Gateway::new(
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        ))
    }

    /// Build one backend with an injected transport (tests and embedders).
    pub fn build_backend(
        &self,
        capability: Capability,
        cfg: BackendConfig,
        transport: Arc<dyn Transport>,
    ) -> Result<Backend> {
        let fixture = match self.mode {
            Mode::Live => None,
            Mode::Replay => {
                let path = self.fixture_path(capability).expect("validated");
                Some(Arc::new(FixtureStore::load(&path)?))
            }
            Mode::Record => {
                let path = self.fixture_path(capability).expect("validated");
                Some(Arc::new(FixtureStore::load_or_empty(&path)?))
            }
        };
        Backend::new(capability, cfg, transport, fixture)
    }

    /// Build a gateway with the same injected transport for every
    /// capability.
    pub fn build_gateway_with_transport(&self, transport: Arc<dyn Transport>) -> Result<Gateway> {
        self.validate_backends()?;
        let ner = self.build_backend(
            Capability::Ner,
            self.backend_config(&self.ner),
            Arc::clone(&transport),
        )?;
        let zsc = self.build_backend(
            Capability::Zsc,
            self.backend_config(&self.zsc),
            Arc::clone(&transport),
        )?;
        let llm = self.build_backend(Capability::Llm, self.backend_config(&self.llm), transport)?;
        Ok(Gateway::new(ner, zsc, llm))
    }

    pub fn zsc_options(&self) -> ZscPipelineOptions {
        ZscPipelineOptions {
            class_set: self.classes,
            template: HypothesisTemplate::default(),
            stock_filter: StockFilterConfig {
                threshold: self.stock_threshold,
                use_summary: self.use_summary,
                ..StockFilterConfig::default()
            },
            context: if self.context {
                Some(ContextOptions {
                    topic_labels: self.context_topics.clone(),
                    ..ContextOptions::default()
                })
            } else {
                None
            },
            include_unresolved: self.include_unresolved,
            use_summary: self.use_summary,
            error_policy: self.on_error,
        }
    }

    pub fn llm_options(&self) -> LlmPipelineOptions {
        LlmPipelineOptions {
            score_policy: ScorePolicy {
                signed_score: self.llm_score,
                unknown_score: 0.0,
            },
            summaries: self.summaries,
            error_policy: self.on_error,
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u128,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct RunCounts {
    pub items_loaded: usize,
    pub duplicates: usize,
    pub lines_skipped: usize,
    pub items_kept: usize,
    pub items_dropped: usize,
    pub zsc_observations: usize,
    pub llm_explanations: usize,
    pub llm_observations: usize,
    pub observations_total: usize,
    pub summaries: usize,
    pub snapshots: usize,
    pub edges_total: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunIssueRecord {
    pub stage: String,
    pub doc_id: Option<String>,
    pub pair: Option<String>,
    pub message: String,
}

/// What a run produced, plus enough to audit it.
#[derive(Debug, Clone, Serialize, Default)]
pub struct RunReport {
    pub config_digest: String,
    pub counts: RunCounts,
    pub timings: Vec<StageTiming>,
    pub issues: Vec<RunIssueRecord>,
}

impl RunReport {
    /// True when every stage completed without recorded issues.
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    /// Process exit code contract: 0 success, 2 partial failure under the
    /// skip policy. (Fatal errors never produce a report; they exit 1.)
    pub fn exit_code(&self) -> i32 {
        if self.is_clean() {
            0
        } else {
            2
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Run the configured pipelines end to end, writing observation,
/// explanation, snapshot, and report files under `out_dir`.
pub fn run_pipeline(config: &RunConfig, gateway: &Gateway) -> Result<RunReport> {
    config.validate()?;
    let mut report = RunReport {
        config_digest: config.digest(),
        ..RunReport::default()
    };
    let record_stage = |report: &mut RunReport, stage: &str, start: Instant| {
        report.timings.push(StageTiming {
            stage: stage.to_string(),
            millis: start.elapsed().as_millis(),
        });
    };

    // ingest
    let start = Instant::now();
    let loaded = load_corpus(&config.corpus, config.on_load_error)?;
    report.counts.items_loaded = loaded.corpus.len();
    report.counts.duplicates = loaded.duplicates;
    report.counts.lines_skipped = loaded.skipped.len();
    for issue in &loaded.skipped {
        report.issues.push(RunIssueRecord {
            stage: "ingest".into(),
            doc_id: None,
            pair: None,
            message: format!("line {}: field `{}`: {}", issue.line, issue.field, issue.message),
        });
    }
    record_stage(&mut report, "ingest", start);

    let table = AliasTable::load(&config.alias_table)?;

    let mut all_observations: Vec<RelationObservation> = Vec::new();
    let mut filtered_corpus = None;

    // zsc pipeline
    if config.zsc_pipeline {
        let start = Instant::now();
        let outcome = run_zsc_pipeline(&loaded.corpus, &table, gateway, &config.zsc_options())?;
        report.counts.items_kept = outcome.kept.len();
        report.counts.items_dropped = outcome.dropped.len();
        report.counts.zsc_observations = outcome.observations.len();
        for issue in &outcome.issues {
            report.issues.push(RunIssueRecord {
                stage: format!("zsc:{}", issue.stage),
                doc_id: Some(issue.doc_id.clone()),
                pair: issue.pair.as_ref().map(|p| p.to_string()),
                message: issue.message.clone(),
            });
        }
        let mut buf = Vec::new();
        write_observations(&outcome.observations, &mut buf)?;
        write_file(&config.out_dir.join("observations.zsc.jsonl"), &buf)?;
        all_observations.extend(outcome.observations);
        filtered_corpus = Some(outcome.kept);
        record_stage(&mut report, "zsc-pipeline", start);
    }

    // llm pipeline shares the stock filter with the zsc pipeline
    if config.llm_pipeline {
        let start = Instant::now();
        let llm_corpus = match filtered_corpus {
            Some(kept) => kept,
            None => {
                let (kept, dropped) = crate::ingest::filter_stock_news(
                    &loaded.corpus,
                    gateway,
                    &config.zsc_options().stock_filter,
                )?;
                report.counts.items_kept = kept.len();
                report.counts.items_dropped = dropped.len();
                kept
            }
        };
        let outcome = run_llm_pipeline(&llm_corpus, &table, gateway, &config.llm_options())?;
        report.counts.llm_explanations = outcome.explanations.len();
        report.counts.llm_observations = outcome.observations.len();
        report.counts.summaries = outcome.summaries.len();
        for issue in &outcome.issues {
            report.issues.push(RunIssueRecord {
                stage: format!("llm:{}", issue.stage),
                doc_id: Some(issue.doc_id.clone()),
                pair: issue.pair.as_ref().map(|p| p.to_string()),
                message: issue.message.clone(),
            });
        }
        for diagnostic in &outcome.diagnostics {
            report.issues.push(RunIssueRecord {
                stage: "llm:parse".into(),
                doc_id: Some(diagnostic.doc_id.clone()),
                pair: None,
                message: format!("{}: {:?}", diagnostic.reason, diagnostic.segment),
            });
        }
        let mut buf = Vec::new();
        write_explanations(&outcome.explanations, &mut buf)?;
        write_file(&config.out_dir.join("explanations.jsonl"), &buf)?;
        let mut buf = Vec::new();
        write_observations(&outcome.observations, &mut buf)?;
        write_file(&config.out_dir.join("observations.llm.jsonl"), &buf)?;
        if config.summaries {
            let mut buf = Vec::new();
            write_summaries(&outcome.summaries, &mut buf)?;
            write_file(&config.out_dir.join("summaries.jsonl"), &buf)?;
        }
        all_observations.extend(outcome.observations);
        record_stage(&mut report, "llm-pipeline", start);
    }

    report.counts.observations_total = all_observations.len();
    let mut buf = Vec::new();
    write_observations(&all_observations, &mut buf)?;
    write_file(&config.out_dir.join("observations.jsonl"), &buf)?;

    // network
    let start = Instant::now();
    let network = build_temporal(
        &all_observations,
        config.window,
        config.stride,
        SnapshotOptions {
            include_isolated: config.include_isolated,
        },
    )?;
    report.counts.snapshots = network.snapshots.len();
    report.counts.edges_total = network.snapshots.iter().map(|s| s.edges.len()).sum();
    let mut manifest = Vec::new();
    for (idx, snapshot) in network.snapshots.iter().enumerate() {
        let name = format!("snapshot-{idx:03}.json");
        write_file(
            &config.out_dir.join(&name),
            &export_snapshot(snapshot, ExportFormat::Json),
        )?;
        manifest.push(name);
    }
    let network_doc = serde_json::json!({
        "window": format_duration(config.window),
        "stride": format_duration(config.stride),
        "snapshots": manifest,
    });
    write_file(
        &config.out_dir.join("network.json"),
        format!("{network_doc:#}\n").as_bytes(),
    )?;
    record_stage(&mut report, "network", start);

    let report_json =
        serde_json::to_vec_pretty(&report).expect("report serializes");
    write_file(&config.out_dir.join("report.json"), &report_json)?;
    Ok(report)
}

/// Record mode: same pipeline, but the gateway appends every response to
/// the fixture files as it goes.
pub fn run_record(config: &RunConfig, gateway: &Gateway) -> Result<RunReport> {
    if config.mode != Mode::Record {
        return Err(Error::config("mode", "run_record requires record mode"));
    }
    run_pipeline(config, gateway)
}

/// Group observations by pair, for summaries and inspection.
pub fn observations_by_pair(
    observations: &[RelationObservation],
) -> BTreeMap<crate::relations::EntityPair, Vec<&RelationObservation>> {
    let mut map: BTreeMap<crate::relations::EntityPair, Vec<&RelationObservation>> =
        BTreeMap::new();
    for obs in observations {
        map.entry(obs.pair.clone()).or_default().push(obs);
    }
    map
}
