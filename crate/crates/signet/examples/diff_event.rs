//! Compare the network before and after an event date: which
//! relationships appeared, disappeared, or flipped sign.
//!
//! The bundled corpus splits around a platform privacy-policy change; the
//! after-window gains negative apple--facebook and apple--snap edges and a
//! positive apple--google edge.
//!
//! ```text
//! cargo run -p signet --example diff_event
//! ```

use std::path::Path;

use chrono::{TimeZone, Utc};

use signet::entities::AliasTable;
use signet::ingest::{load_corpus, OnError};
use signet::network::{build_snapshot, diff_snapshots, SnapshotOptions, TimeWindow};
use signet::relations::run_zsc_pipeline;
use signet::run::RunConfig;

fn main() -> anyhow::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = RunConfig::from_file(&fixtures.join("replay.conf"))?;
    let corpus = load_corpus(&config.corpus, OnError::Fail)?.corpus;
    let table = AliasTable::load(&config.alias_table)?;
    let gateway = config.build_gateway()?;
    let observations = run_zsc_pipeline(&corpus, &table, &gateway, &config.zsc_options())?
        .observations;

    let event = Utc.with_ymd_and_hms(2022, 4, 15, 0, 0, 0).unwrap();
    let before = build_snapshot(
        &observations,
        TimeWindow::new(Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap(), event)?,
        SnapshotOptions::default(),
    );
    let after = build_snapshot(
        &observations,
        TimeWindow::new(event, Utc.with_ymd_and_hms(2022, 6, 1, 0, 0, 0).unwrap())?,
        SnapshotOptions::default(),
    );
    println!(
        "before: {} edge(s); after: {} edge(s); event {event}",
        before.edges.len(),
        after.edges.len()
    );

    let diff = diff_snapshots(&before, &after, config.tau);
    println!("\nadded ({}):", diff.added.len());
    for edge in &diff.added {
        println!(
            "  {:<22} {:+.6}",
            format!("{} -- {}", edge.pair.a(), edge.pair.b()),
            edge.weight
        );
    }
    println!("removed ({}):", diff.removed.len());
    for edge in &diff.removed {
        println!(
            "  {:<22} {:+.6}",
            format!("{} -- {}", edge.pair.a(), edge.pair.b()),
            edge.weight
        );
    }
    println!("sign flips ({}):", diff.sign_flips.len());
    for flip in &diff.sign_flips {
        println!("  {}: {} -> {}", flip.pair, flip.before, flip.after);
    }
    Ok(())
}
