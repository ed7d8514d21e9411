//! Serialize one snapshot in all three formats: canonical JSON (lossless,
//! byte-deterministic), DOT, and GraphML.
//!
//! ```text
//! cargo run -p signet --example export_formats
//! ```

use std::path::Path;

use signet::network::{export_snapshot, snapshot_from_json, ExportFormat};

fn main() -> anyhow::Result<()> {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/snapshot.json");
    let snapshot = snapshot_from_json(&std::fs::read(golden)?)?;

    for (format, banner) in [
        (ExportFormat::Json, "canonical json"),
        (ExportFormat::Dot, "dot"),
        (ExportFormat::GraphMl, "graphml"),
    ] {
        println!("==== {banner} ====");
        print!("{}", String::from_utf8(export_snapshot(&snapshot, format))?);
        println!();
    }

    // json is the canonical round-trip format
    let json = export_snapshot(&snapshot, ExportFormat::Json);
    let reimported = snapshot_from_json(&json)?;
    assert_eq!(json, export_snapshot(&reimported, ExportFormat::Json));
    println!("json round-trip: stable");
    Ok(())
}
