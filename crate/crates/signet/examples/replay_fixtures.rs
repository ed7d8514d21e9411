//! The record/replay machinery up close: canonical request digests, direct
//! backend calls against the bundled fixtures, and proof that replay mode
//! never touches the network.
//!
//! ```text
//! cargo run -p signet --example replay_fixtures
//! ```

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use signet::gateway::{
    request_digest, Capability, Transport, TransportError, TransportErrorKind, TransportRequest,
};
use signet::run::RunConfig;

struct CountingDeadTransport(AtomicUsize);

impl Transport for CountingDeadTransport {
    fn send(&self, _req: &TransportRequest<'_>) -> Result<Vec<u8>, TransportError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::new(
            TransportErrorKind::Connect,
            "this example never dials out",
        ))
    }
}

fn main() -> anyhow::Result<()> {
    // digests are insensitive to field order but sensitive to content
    let a = serde_json::json!({"premise": "p", "candidate_labels": ["x", "y"]});
    let b = serde_json::json!({"candidate_labels": ["x", "y"], "premise": "p"});
    let c = serde_json::json!({"premise": "p!", "candidate_labels": ["x", "y"]});
    println!("digest(a) = {}", request_digest(Capability::Zsc, "m", &a));
    println!("digest(b) = {}  (same fields, different order)", request_digest(Capability::Zsc, "m", &b));
    println!("digest(c) = {}  (one character changed)", request_digest(Capability::Zsc, "m", &c));
    assert_eq!(
        request_digest(Capability::Zsc, "m", &a),
        request_digest(Capability::Zsc, "m", &b)
    );
    assert_ne!(
        request_digest(Capability::Zsc, "m", &a),
        request_digest(Capability::Zsc, "m", &c)
    );

    // a replay gateway over the bundled fixtures, wired to a transport
    // that counts (and refuses) any network attempt
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = RunConfig::from_file(&fixtures.join("replay.conf"))?;
    let transport = Arc::new(CountingDeadTransport(AtomicUsize::new(0)));
    let gateway = config.build_gateway_with_transport(transport.clone() as Arc<dyn Transport>)?;

    let headline = "Facebook Paid GOP Firm to Malign Tiktok";
    let mentions = gateway.ner(headline)?;
    println!("\nner({headline:?}):");
    for mention in &mentions {
        println!(
            "  [{:>2}, {:>2})  {:<10} {:.2}",
            mention.start, mention.end, mention.surface, mention.score
        );
    }

    let labels = vec![
        "stock market report".to_string(),
        "business relationship news".to_string(),
    ];
    let verdict = gateway.zsc(headline, "This example is {}.", &labels)?;
    println!("\nstock filter: top label {:?} at {:.2}", verdict.top().0, verdict.top().1);

    // a request the fixture has never seen is a determinism error, not a
    // silent network fallback
    let miss = gateway.zsc("something never recorded", "This example is {}.", &labels);
    println!("\nunrecorded request: {}", miss.unwrap_err());
    println!("network calls attempted: {}", transport.0.load(Ordering::SeqCst));
    Ok(())
}
