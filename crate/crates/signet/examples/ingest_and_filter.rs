//! Load the bundled news corpus and split it into business news vs
//! stock-market noise, entirely offline via the replay fixtures.
//!
//! ```text
//! cargo run -p signet --example ingest_and_filter
//! ```

use std::path::Path;

use signet::ingest::{filter_stock_news, load_corpus, OnError, StockFilterConfig};
use signet::run::RunConfig;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = RunConfig::from_file(&fixtures.join("replay.conf"))?;

    let report = load_corpus(&config.corpus, OnError::Skip)?;
    println!(
        "loaded {} items ({} duplicates dropped, {} lines skipped)",
        report.corpus.len(),
        report.duplicates,
        report.skipped.len()
    );
    for item in report.corpus.items() {
        println!("  {}  {}  {}", item.id, item.published_at, item.headline);
    }

    let gateway = config.build_gateway()?;
    let (kept, dropped) =
        filter_stock_news(&report.corpus, &gateway, &StockFilterConfig::default())?;
    println!("\nfilter: kept {}, dropped {}", kept.len(), dropped.len());
    for item in dropped.items() {
        println!("  dropped: {}", item.headline);
    }
    Ok(())
}
