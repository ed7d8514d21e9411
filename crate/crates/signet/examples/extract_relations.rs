//! Run the zero-shot relation-extraction pipeline over the bundled corpus:
//! stock filter, organization NER, alias resolution, pair enumeration, and
//! per-pair hypothesis classification.
//!
//! ```text
//! cargo run -p signet --example extract_relations
//! ```

use std::path::Path;

use signet::entities::AliasTable;
use signet::ingest::{load_corpus, OnError};
use signet::relations::run_zsc_pipeline;
use signet::run::RunConfig;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = RunConfig::from_file(&fixtures.join("replay.conf"))?;

    let corpus = load_corpus(&config.corpus, OnError::Fail)?.corpus;
    let table = AliasTable::load(&config.alias_table)?;
    let gateway = config.build_gateway()?;

    let outcome = run_zsc_pipeline(&corpus, &table, &gateway, &config.zsc_options())?;
    println!("observations ({}):", outcome.observations.len());
    for obs in &outcome.observations {
        println!(
            "  {:<24} {:<8} {:.2}   from {:?}",
            format!("{} -- {}", obs.pair.a(), obs.pair.b()),
            obs.label.as_str(),
            obs.score,
            obs.display_names,
        );
    }

    // pairs the fixture bundle has no recorded judgment for show up as
    // issues instead of invented scores
    println!("\nunscored pairs ({}):", outcome.issues.len());
    for issue in &outcome.issues {
        println!(
            "  {}  ({})",
            issue.pair.as_ref().map(|p| p.to_string()).unwrap_or_default(),
            issue.stage
        );
    }
    Ok(())
}
