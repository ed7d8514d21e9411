//! Run the LLM explanation pipeline: prompt for per-pair sign rationales,
//! parse the completions, and summarize each pair across documents.
//!
//! ```text
//! cargo run -p signet --example explain_pairs
//! ```

use std::path::Path;

use signet::entities::AliasTable;
use signet::explain::{run_llm_pipeline, LlmPipelineOptions};
use signet::ingest::{load_corpus, OnError};
use signet::run::RunConfig;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = RunConfig::from_file(&fixtures.join("replay.conf"))?;

    let corpus = load_corpus(&config.corpus, OnError::Fail)?.corpus;
    let table = AliasTable::load(&config.alias_table)?;
    let gateway = config.build_gateway()?;

    let options = LlmPipelineOptions {
        summaries: true,
        ..LlmPipelineOptions::default()
    };
    let outcome = run_llm_pipeline(&corpus, &table, &gateway, &options)?;

    println!("explanations ({}):", outcome.explanations.len());
    for explanation in &outcome.explanations {
        let rationale: String = explanation.rationale.chars().take(72).collect();
        println!(
            "  {:<22} {:<8} {}",
            format!("{} -- {}", explanation.pair.a(), explanation.pair.b()),
            explanation.label.as_str(),
            rationale
        );
    }

    println!("\nper-pair summaries ({}):", outcome.summaries.len());
    for summary in &outcome.summaries {
        println!(
            "  {} -- {} ({} doc(s)): {}",
            summary.pair.a(),
            summary.pair.b(),
            summary.observation_count,
            summary.summary
        );
    }
    Ok(())
}
