//! The whole workflow in one call: ingest, filter, both extraction
//! pipelines, windowed snapshots, and a run report, using the bundled
//! replay configuration.
//!
//! ```text
//! cargo run -p signet --example end_to_end
//! ```

use std::path::Path;

use signet::run::{run_pipeline, RunConfig};

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut config = RunConfig::from_file(&fixtures.join("replay.conf"))?;
    config.out_dir = std::env::temp_dir().join("signet-end-to-end");
    config.summaries = true;

    let gateway = config.build_gateway()?;
    let report = run_pipeline(&config, &gateway)?;

    println!("config digest: {}", report.config_digest);
    println!("counts:");
    println!("  items loaded     {}", report.counts.items_loaded);
    println!("  kept / dropped   {} / {}", report.counts.items_kept, report.counts.items_dropped);
    println!("  zsc observations {}", report.counts.zsc_observations);
    println!("  llm explanations {}", report.counts.llm_explanations);
    println!("  llm observations {}", report.counts.llm_observations);
    println!("  summaries        {}", report.counts.summaries);
    println!("  snapshots        {}", report.counts.snapshots);
    println!("  edges            {}", report.counts.edges_total);
    println!("stage timings:");
    for timing in &report.timings {
        println!("  {:<14} {:>5} ms", timing.stage, timing.millis);
    }
    if !report.issues.is_empty() {
        println!("issues ({}): pairs without recorded judgments", report.issues.len());
        for issue in &report.issues {
            println!(
                "  [{}] {}",
                issue.stage,
                issue.pair.clone().unwrap_or_default()
            );
        }
    }
    println!("\noutputs under {}", config.out_dir.display());
    for entry in std::fs::read_dir(&config.out_dir)? {
        println!("  {}", entry?.file_name().to_string_lossy());
    }
    println!("exit code contract: {}", report.exit_code());
    Ok(())
}
