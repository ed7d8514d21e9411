//! Canonical request digests and content-derived identifiers.
//!
//! Everything that needs a stable identity across runs and platforms goes
//! through here: replay-fixture keys, news-item ids, observation ids.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Digest of an arbitrary serializable request.
///
/// The value is serialized to a canonical JSON form (object keys sorted,
/// no insignificant whitespace) before hashing, so two requests that differ
/// only in field order produce the same digest.
pub fn canonical_digest<T: Serialize>(value: &T) -> String {
    let canon = canonical_json(value);
    hex_digest(canon.as_bytes())
}

/// Canonical JSON serialization: sorted object keys, compact separators.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json::Value keeps object keys in a BTreeMap, so serializing a
    // Value always emits sorted keys.
    let v = serde_json::to_value(value).expect("gateway requests are plain data");
    serde_json::to_string(&v).expect("canonical value serializes")
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let out = hasher.finalize();
    let mut s = String::with_capacity(out.len() * 2);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Short content id: first 16 hex chars of the SHA-256 of the input parts,
/// joined with a separator that cannot occur inside them ambiguously.
pub fn content_id(parts: &[&str]) -> String {
    let joined = parts.join("\u{1f}");
    let mut hex = hex_digest(joined.as_bytes());
    hex.truncate(16);
    hex
}

/// Lowercase slug over `[a-z0-9-]`: runs of anything else collapse to `-`.
pub fn slugify(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_dash = false;
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            if pending_dash && !out.is_empty() {
                out.push('-');
            }
            pending_dash = false;
            out.push(c.to_ascii_lowercase());
        } else {
            pending_dash = true;
        }
    }
    out
}
