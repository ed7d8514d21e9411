//! Uniform access to the three remote model capabilities (NER, zero-shot
//! classification, LLM completion) with retries, bounded in-flight requests,
//! and a deterministic record/replay fixture layer.

mod fixture;
mod transport;
mod wire;

pub use fixture::FixtureStore;
pub use transport::{HttpTransport, Transport, TransportError, TransportErrorKind, TransportRequest};
pub use wire::{ChatMessage, LlmResult, MentionResult, ZscResult};

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde_json::Value;

use crate::digest::canonical_digest;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Capability {
    Ner,
    Zsc,
    Llm,
}

impl Capability {
    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Ner => "ner",
            Capability::Zsc => "zsc",
            Capability::Llm => "llm",
        }
    }

    /// Environment variable names follow `SIGNET_<CAP>_ENDPOINT` /
    /// `SIGNET_<CAP>_MODEL`.
    pub fn endpoint_env(self) -> String {
        format!("SIGNET_{}_ENDPOINT", self.as_str().to_ascii_uppercase())
    }

    pub fn model_env(self) -> String {
        format!("SIGNET_{}_MODEL", self.as_str().to_ascii_uppercase())
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Live,
    Record,
    #[default]
    Replay,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Live => "live",
            Mode::Record => "record",
            Mode::Replay => "replay",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(Mode::Live),
            "record" => Ok(Mode::Record),
            "replay" => Ok(Mode::Replay),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode `{other}` (expected live|record|replay)"
            ))),
        }
    }
}

/// Exponential backoff with deterministic bounded jitter.
///
/// The jitter factor is derived from the request digest and attempt number,
/// so delays are reproducible for a given request while still spreading
/// distinct requests apart. Successive delays never decrease.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackoffPolicy {
    pub base: Duration,
    pub cap: Duration,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy {
            base: Duration::from_millis(250),
            cap: Duration::from_secs(8),
        }
    }
}

impl BackoffPolicy {
    /// Delay before retry number `attempt` (0-based), clamped so the
    /// sequence is non-decreasing.
    pub fn delay(&self, digest: &str, attempt: u32, previous: Duration) -> Duration {
        let ceiling = self
            .base
            .saturating_mul(1u32.checked_shl(attempt).unwrap_or(u32::MAX))
            .min(self.cap);
        // jitter factor in [0.5, 1.0], deterministic per (digest, attempt)
        let mut seed = 0xcbf2_9ce4_8422_2325u64;
        for b in digest.as_bytes() {
            seed = (seed ^ u64::from(*b)).wrapping_mul(0x100_0000_01b3);
        }
        seed = seed.wrapping_add(u64::from(attempt)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        seed ^= seed >> 32;
        let unit = (seed % 1_000_000) as f64 / 1_000_000.0;
        let jittered = ceiling.mul_f64(0.5 + unit * 0.5);
        jittered.max(previous)
    }
}

#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model_id: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub mode: Mode,
    pub backoff: BackoffPolicy,
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>, model_id: impl Into<String>, mode: Mode) -> Self {
        BackendConfig {
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            timeout: Duration::from_secs(30),
            max_retries: 3,
            max_in_flight: 4,
            mode,
            backoff: BackoffPolicy::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_in_flight < 1 {
            return Err(Error::Config {
                field: "max_in_flight".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Counting permits enforcing the per-backend in-flight cap.
struct Permits {
    state: Mutex<usize>,
    cond: Condvar,
    cap: usize,
}

impl Permits {
    fn new(cap: usize) -> Self {
        Permits {
            state: Mutex::new(0),
            cond: Condvar::new(),
            cap,
        }
    }

    fn acquire(self: &Arc<Self>) -> PermitGuard {
        let mut held = self.state.lock().unwrap();
        while *held >= self.cap {
            held = self.cond.wait(held).unwrap();
        }
        *held += 1;
        PermitGuard {
            permits: Arc::clone(self),
        }
    }
}

struct PermitGuard {
    permits: Arc<Permits>,
}

impl Drop for PermitGuard {
    fn drop(&mut self) {
        let mut held = self.permits.state.lock().unwrap();
        *held -= 1;
        self.permits.cond.notify_one();
    }
}

/// Digest envelope for one capability request. Incorporates the capability
/// and model id so that the same text sent to different models never
/// collides in a fixture.
pub fn request_digest(capability: Capability, model_id: &str, request: &Value) -> String {
    canonical_digest(&serde_json::json!({
        "capability": capability.as_str(),
        "model": model_id,
        "request": request,
    }))
}

/// One remote capability endpoint.
pub struct Backend {
    capability: Capability,
    cfg: BackendConfig,
    transport: Arc<dyn Transport>,
    fixture: Option<Arc<FixtureStore>>,
    permits: Arc<Permits>,
    sleeper: Box<dyn Fn(Duration) + Send + Sync>,
}

impl Backend {
    pub fn new(
        capability: Capability,
        cfg: BackendConfig,
        transport: Arc<dyn Transport>,
        fixture: Option<Arc<FixtureStore>>,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.mode != Mode::Live && fixture.is_none() {
            return Err(Error::Config {
                field: "fixtures".into(),
                message: format!("{} mode requires a fixture store", cfg.mode.as_str()),
            });
        }
        let cap = cfg.max_in_flight;
        Ok(Backend {
            capability,
            cfg,
            transport,
            fixture,
            permits: Arc::new(Permits::new(cap)),
            sleeper: Box::new(std::thread::sleep),
        })
    }

    /// Replace the retry sleeper (used by tests to observe delays without
    /// actually sleeping).
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Box::new(sleeper);
        self
    }

    pub fn capability(&self) -> Capability {
        self.capability
    }

    pub fn config(&self) -> &BackendConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.cfg.mode
    }

    pub fn max_in_flight(&self) -> usize {
        self.cfg.max_in_flight
    }

    /// Resolve a request to response bytes according to the backend mode.
    fn fetch(&self, request: &Value) -> Result<Arc<Vec<u8>>> {
        let digest = request_digest(self.capability, &self.cfg.model_id, request);
        match self.cfg.mode {
            Mode::Replay => {
                let store = self.fixture.as_ref().expect("validated at construction");
                store.get(&digest).ok_or(Error::Determinism {
                    capability: self.capability,
                    digest,
                })
            }
            Mode::Record => {
                let store = self.fixture.as_ref().expect("validated at construction");
                if let Some(bytes) = store.get(&digest) {
                    return Ok(bytes);
                }
                let bytes = self.send_with_retries(request, &digest)?;
                store.append(&digest, &bytes)?;
                Ok(Arc::new(bytes))
            }
            Mode::Live => Ok(Arc::new(self.send_with_retries(request, &digest)?)),
        }
    }

    fn send_with_retries(&self, request: &Value, digest: &str) -> Result<Vec<u8>> {
        let body = serde_json::to_vec(request).expect("request serializes");
        let req = TransportRequest {
            url: &self.cfg.endpoint,
            body: &body,
        };
        let _permit = self.permits.acquire();
        let mut previous = Duration::ZERO;
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            match self.transport.send(&req) {
                Ok(bytes) => return Ok(bytes),
                Err(err) => {
                    let retries_left = attempts <= self.cfg.max_retries;
                    if !err.is_retryable() || !retries_left {
                        return Err(Error::Backend {
                            capability: self.capability,
                            attempts,
                            message: err.to_string(),
                        });
                    }
                    let delay = self.cfg.backoff.delay(digest, attempts - 1, previous);
                    previous = delay;
                    (self.sleeper)(delay);
                }
            }
        }
    }

    fn protocol_err(&self, message: impl Into<String>) -> Error {
        Error::Protocol {
            capability: self.capability,
            message: message.into(),
        }
    }

    /// Detect organization mentions in `text`, sorted by start offset.
    /// Non-organization mentions are dropped by the default post-filter.
    pub fn ner(&self, text: &str) -> Result<Vec<MentionResult>> {
        if text.trim().is_empty() {
            return Err(Error::Precondition("ner requires non-empty text".into()));
        }
        let request = wire::ner_request(text);
        let bytes = self.fetch(&request)?;
        let parsed: wire::NerResponse = serde_json::from_slice(&bytes)
            .map_err(|e| self.protocol_err(format!("bad ner response: {e}")))?;
        let char_len = text.chars().count();
        let mut mentions = Vec::new();
        for m in parsed.mentions {
            if m.start >= m.end || m.end > char_len {
                return Err(self.protocol_err(format!(
                    "mention span [{}, {}) out of bounds for text of {} chars",
                    m.start, m.end, char_len
                )));
            }
            let slice: String = text.chars().skip(m.start).take(m.end - m.start).collect();
            if slice != m.text {
                return Err(self.protocol_err(format!(
                    "mention text {:?} does not match span content {:?}",
                    m.text, slice
                )));
            }
            if !(0.0..=1.0).contains(&m.score) {
                return Err(self.protocol_err(format!("mention score {} out of [0,1]", m.score)));
            }
            if !is_org_label(&m.label) {
                continue;
            }
            mentions.push(MentionResult {
                surface: m.text,
                start: m.start,
                end: m.end,
                label: m.label,
                score: m.score,
            });
        }
        mentions.sort_by(|a, b| a.start.cmp(&b.start).then(a.end.cmp(&b.end)));
        Ok(mentions)
    }

    /// Classify `premise` against `candidate_labels` by instantiating
    /// `hypothesis_template` (exactly one `{}` placeholder) once per label.
    /// Single-label mode: scores are a distribution over the candidates.
    pub fn zsc(
        &self,
        premise: &str,
        hypothesis_template: &str,
        candidate_labels: &[String],
    ) -> Result<ZscResult> {
        if candidate_labels.is_empty() {
            return Err(Error::Precondition(
                "zsc requires at least one candidate label".into(),
            ));
        }
        if hypothesis_template.matches("{}").count() != 1 {
            return Err(Error::Precondition(format!(
                "hypothesis template must contain exactly one {{}} placeholder: {hypothesis_template:?}"
            )));
        }
        let request = wire::zsc_request(premise, hypothesis_template, candidate_labels, false);
        let bytes = self.fetch(&request)?;
        let parsed: wire::ZscResponse = serde_json::from_slice(&bytes)
            .map_err(|e| self.protocol_err(format!("bad zsc response: {e}")))?;
        if parsed.labels.len() != parsed.scores.len() || parsed.labels.is_empty() {
            return Err(self.protocol_err("labels and scores must be parallel and non-empty"));
        }
        let mut requested: Vec<&str> = candidate_labels.iter().map(String::as_str).collect();
        requested.sort_unstable();
        let mut returned: Vec<&str> = parsed.labels.iter().map(String::as_str).collect();
        returned.sort_unstable();
        if requested != returned {
            return Err(self.protocol_err("returned label set differs from candidates"));
        }
        for s in &parsed.scores {
            if !(0.0..=1.0).contains(s) {
                return Err(self.protocol_err(format!("score {s} out of [0,1]")));
            }
        }
        let total: f64 = parsed.scores.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(self.protocol_err(format!(
                "single-label scores must sum to 1 (got {total})"
            )));
        }
        let mut pairs: Vec<(String, f64)> = parsed
            .labels
            .into_iter()
            .zip(parsed.scores)
            .collect();
        // descending score, ties by label
        pairs.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("scores validated finite")
                .then_with(|| a.0.cmp(&b.0))
        });
        let (labels, scores) = pairs.into_iter().unzip();
        Ok(ZscResult { labels, scores })
    }

    /// Request a completion for `messages`, returned verbatim.
    pub fn llm_complete(&self, messages: &[ChatMessage]) -> Result<LlmResult> {
        if messages.is_empty() {
            return Err(Error::Precondition(
                "llm_complete requires a non-empty prompt".into(),
            ));
        }
        let request = wire::llm_request(&self.cfg.model_id, messages);
        let bytes = self.fetch(&request)?;
        let parsed: wire::LlmResponse = serde_json::from_slice(&bytes)
            .map_err(|e| self.protocol_err(format!("bad llm response: {e}")))?;
        Ok(LlmResult {
            text: parsed.text,
            model_id: parsed.model,
        })
    }

    /// The canonical digest this backend would use for an LLM prompt.
    pub fn prompt_digest(&self, messages: &[ChatMessage]) -> String {
        request_digest(
            self.capability,
            &self.cfg.model_id,
            &wire::llm_request(&self.cfg.model_id, messages),
        )
    }
}

fn is_org_label(label: &str) -> bool {
    let lower = label.to_ascii_lowercase();
    matches!(
        lower.as_str(),
        "org" | "i-org" | "b-org" | "organization" | "organisation"
    )
}

/// The three capability backends behind one handle.
pub struct Gateway {
    ner: Backend,
    zsc: Backend,
    llm: Backend,
}

impl Gateway {
    pub fn new(ner: Backend, zsc: Backend, llm: Backend) -> Self {
        Gateway { ner, zsc, llm }
    }

    pub fn ner_backend(&self) -> &Backend {
        &self.ner
    }

    pub fn zsc_backend(&self) -> &Backend {
        &self.zsc
    }

    pub fn llm_backend(&self) -> &Backend {
        &self.llm
    }

    pub fn ner(&self, text: &str) -> Result<Vec<MentionResult>> {
        self.ner.ner(text)
    }

    pub fn zsc(
        &self,
        premise: &str,
        hypothesis_template: &str,
        candidate_labels: &[String],
    ) -> Result<ZscResult> {
        self.zsc.zsc(premise, hypothesis_template, candidate_labels)
    }

    pub fn llm_complete(&self, messages: &[ChatMessage]) -> Result<LlmResult> {
        self.llm.llm_complete(messages)
    }
}

pub const DEFAULT_NER_MODEL: &str = "xlm-roberta-large-finetuned-conll03-english";
pub const DEFAULT_ZSC_MODEL: &str = "bart-large-mnli";
pub const DEFAULT_LLM_MODEL: &str = "gpt-4";
