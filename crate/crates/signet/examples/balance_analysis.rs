//! Structural-balance analytics on a snapshot: discretize the weighted
//! edges to signs, census the triangles, compute the balance index, and
//! predict signs for unobserved pairs from their common neighbors.
//!
//! ```text
//! cargo run -p signet --example balance_analysis
//! ```

use std::path::Path;

use signet::balance::{balance_index, discretize, predict_edge_sign, triad_census, TriadKind};
use signet::network::snapshot_from_json;
use signet::relations::EntityPair;

fn main() -> anyhow::Result<()> {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/snapshot.json");
    let snapshot = snapshot_from_json(&std::fs::read(golden)?)?;
    let tau = 0.1;
    let graph = discretize(&snapshot, tau);
    println!(
        "discretized at tau={tau}: {} nodes, {} signed edges",
        graph.nodes.len(),
        graph.signed_edges.len()
    );
    for (pair, sign) in &graph.signed_edges {
        println!("  {:<22} {}", pair.to_string(), if *sign > 0 { "+" } else { "-" });
    }

    let census = triad_census(&graph);
    println!("\ntriad census:");
    for kind in TriadKind::ALL {
        println!("  {}  {}", kind.symbol(), census.get(kind));
    }
    match balance_index(&census) {
        Some(index) => println!("balance index: {index:.3}"),
        None => println!("balance index: undefined (no closed triangles)"),
    }

    println!("\nsign predictions for unobserved pairs:");
    let nodes: Vec<&String> = graph.nodes.iter().collect();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let pair = EntityPair::new(nodes[i].clone(), nodes[j].clone())?;
            if graph.signed_edges.contains_key(&pair) {
                continue;
            }
            let prediction = predict_edge_sign(&graph, &pair)?;
            println!(
                "  {:<22} {:?} (votes +{} / -{})",
                pair.to_string(),
                prediction.predicted,
                prediction.votes.0,
                prediction.votes.1
            );
        }
    }
    Ok(())
}
