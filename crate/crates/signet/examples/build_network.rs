//! Aggregate relation observations into a weighted signed network
//! snapshot, then into a windowed sequence of snapshots.
//!
//! ```text
//! cargo run -p signet --example build_network
//! ```

use std::path::Path;

use chrono::{Duration, TimeZone, Utc};

use signet::entities::AliasTable;
use signet::ingest::{load_corpus, OnError};
use signet::network::{build_snapshot, build_temporal, SnapshotOptions, TimeWindow};
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

    // one all-covering window
    let window = TimeWindow::new(
        Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap(),
        Utc.with_ymd_and_hms(2022, 6, 1, 0, 0, 0).unwrap(),
    )?;
    let snapshot = build_snapshot(&observations, window, SnapshotOptions::default());
    println!(
        "snapshot [{} .. {}): {} nodes, {} edges",
        snapshot.window.start(),
        snapshot.window.end(),
        snapshot.nodes.len(),
        snapshot.edges.len()
    );
    for edge in &snapshot.edges {
        println!(
            "  {:<22} weight {:+.6}  (+{} -{} ={} ?{})",
            format!("{} -- {}", edge.pair.a(), edge.pair.b()),
            edge.weight,
            edge.tallies.positive,
            edge.tallies.negative,
            edge.tallies.neutral,
            edge.tallies.unknown,
        );
    }

    // the same observations on a 30-day grid
    let network = build_temporal(
        &observations,
        Duration::days(30),
        Duration::days(30),
        SnapshotOptions::default(),
    )?;
    println!("\n30-day windows: {} snapshot(s)", network.snapshots.len());
    for snapshot in &network.snapshots {
        println!(
            "  [{} .. {}) {} edge(s)",
            snapshot.window.start(),
            snapshot.window.end(),
            snapshot.edges.len()
        );
    }
    Ok(())
}
