//! Signed business networks from news text.
//!
//! This crate turns a news corpus into a sequence of weighted signed
//! networks over organizations, using three pluggable model capabilities
//! behind one gateway: named-entity recognition, entailment-based zero-shot
//! classification, and instruction-tuned LLM completion. Every remote call
//! can be recorded once and replayed deterministically, so whole pipeline
//! runs are reproducible byte for byte.
//!
//! The pieces, in pipeline order:
//!
//! - [`ingest`]: load line-delimited news records, deduplicate, and drop
//!   stock-market noise with a zero-shot filter.
//! - [`gateway`]: retrying, concurrency-capped clients for the three model
//!   capabilities, with record/replay fixtures keyed by canonical request
//!   digests.
//! - [`entities`]: alias-table resolution of raw mention surfaces to
//!   canonical organization ids.
//! - [`relations`]: per-pair relationship classification with a hypothesis
//!   template ("the relationship between A and B is ...").
//! - [`explain`]: a parallel LLM pipeline producing sign rationales per
//!   pair, plus cross-document summaries.
//! - [`network`]: windowed aggregation of observations into signed
//!   snapshots, snapshot diffing, and JSON/DOT/GraphML export.
//! - [`balance`]: structural-balance analytics (triad census, balance
//!   index, sign prediction for unseen edges).
//! - [`run`]: configuration, the end-to-end runner, and run reports.
//!
//! See the crate examples for one runnable program per capability.

pub mod balance;
pub mod digest;
pub mod entities;
pub mod error;
pub mod explain;
pub mod gateway;
pub mod ingest;
pub mod network;
pub mod relations;
pub mod run;

mod pool;

pub use error::{Error, Result};
