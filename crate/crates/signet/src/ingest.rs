//! Corpus ingestion: load, validate, deduplicate, and pre-filter news
//! records into a normalized corpus ordered by publication time.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::digest::content_id;
use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::pool::parallel_map;

/// One ingested news record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsItem {
    /// Content digest of (url, headline); stable across runs.
    pub id: String,
    pub headline: String,
    pub summary: Option<String>,
    pub published_at: DateTime<Utc>,
    pub source: String,
    pub url: String,
    pub tickers: Vec<String>,
}

impl NewsItem {
    /// Build a validated item. The headline is whitespace-trimmed and the
    /// timestamp truncated to second precision before the id is derived.
    pub fn new(
        headline: &str,
        summary: Option<String>,
        published_at: DateTime<Utc>,
        source: impl Into<String>,
        url: impl Into<String>,
        tickers: Vec<String>,
    ) -> Result<Self> {
        let headline = headline.trim().to_string();
        if headline.is_empty() {
            return Err(Error::InvalidArgument("headline must be non-empty".into()));
        }
        let url = url.into();
        let published_at = published_at.with_nanosecond(0).expect("0 ns is valid");
        Ok(NewsItem {
            id: news_item_id(&url, &headline),
            headline,
            summary,
            published_at,
            source: source.into(),
            url,
            tickers,
        })
    }

    /// The classification premise for this item: headline only by default,
    /// headline plus summary when `use_summary` is set.
    pub fn premise_text(&self, use_summary: bool) -> String {
        match (&self.summary, use_summary) {
            (Some(summary), true) if !summary.trim().is_empty() => {
                format!("{} {}", self.headline, summary.trim())
            }
            _ => self.headline.clone(),
        }
    }
}

pub fn news_item_id(url: &str, headline: &str) -> String {
    content_id(&[url, headline])
}

/// Items sorted ascending by (published_at, id), unique by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    items: Vec<NewsItem>,
}

impl Corpus {
    /// Deduplicate by id (first occurrence wins) and sort. Returns the
    /// corpus plus how many duplicates were dropped.
    pub fn from_items(items: Vec<NewsItem>) -> (Self, usize) {
        let mut seen = std::collections::HashSet::new();
        let mut kept = Vec::with_capacity(items.len());
        let mut duplicates = 0;
        for item in items {
            if seen.insert(item.id.clone()) {
                kept.push(item);
            } else {
                duplicates += 1;
            }
        }
        kept.sort_by(|a, b| {
            a.published_at
                .cmp(&b.published_at)
                .then_with(|| a.id.cmp(&b.id))
        });
        (Corpus { items: kept }, duplicates)
    }

    pub fn items(&self) -> &[NewsItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&NewsItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, NewsItem> {
        self.items.iter()
    }
}

/// Serialized line schema for the input file. Unknown fields are ignored.
#[derive(Deserialize)]
struct RawRecord {
    headline: String,
    #[serde(default)]
    summary: Option<String>,
    published_at: String,
    source: String,
    url: String,
    #[serde(default)]
    tickers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnError {
    Fail,
    Skip,
}

impl std::str::FromStr for OnError {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fail" => Ok(OnError::Fail),
            "skip" => Ok(OnError::Skip),
            other => Err(Error::InvalidArgument(format!(
                "unknown on-error policy `{other}` (expected fail|skip)"
            ))),
        }
    }
}

/// A malformed line that was skipped.
#[derive(Debug, Clone, Serialize)]
pub struct LineIssue {
    pub line: usize,
    pub field: String,
    pub message: String,
}

#[derive(Debug)]
pub struct LoadReport {
    pub corpus: Corpus,
    pub skipped: Vec<LineIssue>,
    pub duplicates: usize,
}

fn parse_line(line: &str, line_no: usize) -> std::result::Result<NewsItem, LineIssue> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| {
        // serde's message names the missing/mistyped field where it can
        let msg = e.to_string();
        let field = ["headline", "summary", "published_at", "source", "url", "tickers"]
            .iter()
            .find(|f| msg.contains(*f))
            .unwrap_or(&"record")
            .to_string();
        LineIssue {
            line: line_no,
            field,
            message: msg,
        }
    })?;
    if raw.headline.trim().is_empty() {
        return Err(LineIssue {
            line: line_no,
            field: "headline".into(),
            message: "empty after trimming".into(),
        });
    }
    let published_at = DateTime::parse_from_rfc3339(&raw.published_at)
        .map_err(|e| LineIssue {
            line: line_no,
            field: "published_at".into(),
            message: e.to_string(),
        })?
        .with_timezone(&Utc);
    NewsItem::new(
        &raw.headline,
        raw.summary,
        published_at,
        raw.source,
        raw.url,
        raw.tickers,
    )
    .map_err(|e| LineIssue {
        line: line_no,
        field: "record".into(),
        message: e.to_string(),
    })
}

/// Load a line-delimited corpus file.
///
/// With `OnError::Fail` the first malformed line aborts the load with its
/// line number and offending field. With `OnError::Skip` malformed lines are
/// reported in the result and skipped.
pub fn load_corpus(path: &Path, on_error: OnError) -> Result<LoadReport> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_corpus(BufReader::new(file), on_error)
}

/// Parse line-delimited records from any reader (shared by the file loader
/// and the HTTP fetcher).
pub fn parse_corpus(reader: impl BufRead, on_error: OnError) -> Result<LoadReport> {
    let mut items = Vec::new();
    let mut skipped = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<reader>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, idx + 1) {
            Ok(item) => items.push(item),
            Err(issue) => match on_error {
                OnError::Fail => {
                    return Err(Error::CorpusParse {
                        line: issue.line,
                        field: issue.field,
                        message: issue.message,
                    })
                }
                OnError::Skip => skipped.push(issue),
            },
        }
    }
    let (corpus, duplicates) = Corpus::from_items(items);
    Ok(LoadReport {
        corpus,
        skipped,
        duplicates,
    })
}

/// Fetch a line-delimited corpus over plain HTTP GET. A generic stand-in
/// for hosted news feeds: whatever serves the input schema works.
pub fn fetch_corpus(url: &str, timeout: std::time::Duration, on_error: OnError) -> Result<LoadReport> {
    let agent = ureq::AgentBuilder::new().timeout(timeout).build();
    let response = agent.get(url).call().map_err(|e| {
        Error::io(url, std::io::Error::other(e.to_string()))
    })?;
    let mut body = String::new();
    response
        .into_reader()
        .read_to_string(&mut body)
        .map_err(|e| Error::io(url, e))?;
    parse_corpus(std::io::Cursor::new(body), on_error)
}

/// Write a corpus back out in the line-delimited input schema.
pub fn write_corpus(corpus: &Corpus, out: &mut impl std::io::Write) -> Result<()> {
    for item in corpus.items() {
        let line = serde_json::json!({
            "headline": item.headline,
            "summary": item.summary,
            "published_at": item.published_at.to_rfc3339_opts(SecondsFormat::Secs, true),
            "source": item.source,
            "url": item.url,
            "tickers": item.tickers,
        });
        writeln!(out, "{line}").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

/// Candidate labels and threshold for the stock-news pre-filter.
#[derive(Debug, Clone)]
pub struct StockFilterConfig {
    /// Label whose win drops the item.
    pub stock_label: String,
    /// Competing label that keeps the item.
    pub keep_label: String,
    pub hypothesis_template: String,
    /// Drop when the stock label ranks first with at least this score.
    pub threshold: f64,
    pub use_summary: bool,
}

impl Default for StockFilterConfig {
    fn default() -> Self {
        StockFilterConfig {
            stock_label: "stock market report".into(),
            keep_label: "business relationship news".into(),
            hypothesis_template: "This example is {}.".into(),
            threshold: 0.5,
            use_summary: false,
        }
    }
}

/// Partition a corpus into (kept, dropped) by classifying each item against
/// the stock/business label pair. Items are classified concurrently under
/// the ZSC backend's in-flight cap; the partition is in corpus order.
pub fn filter_stock_news(
    corpus: &Corpus,
    gateway: &Gateway,
    cfg: &StockFilterConfig,
) -> Result<(Corpus, Corpus)> {
    let labels = vec![cfg.stock_label.clone(), cfg.keep_label.clone()];
    let workers = gateway.zsc_backend().max_in_flight();
    let verdicts = parallel_map(corpus.items(), workers, |_, item| {
        let premise = item.premise_text(cfg.use_summary);
        gateway
            .zsc(&premise, &cfg.hypothesis_template, &labels)
            .map(|result| {
                let (top, score) = result.top();
                top == cfg.stock_label && score >= cfg.threshold
            })
            .map_err(|e| e.for_doc(&item.id, "filter"))
    });

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (item, verdict) in corpus.items().iter().zip(verdicts) {
        if verdict? {
            dropped.push(item.clone());
        } else {
            kept.push(item.clone());
        }
    }
    Ok((Corpus { items: kept }, Corpus { items: dropped }))
}
