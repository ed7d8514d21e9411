//! Replay fixtures: a persistent map from canonical request digest to the
//! recorded response bytes for that request.
//!
//! File format is one JSON object per line, `{"digest": ..., "response": ...}`
//! with the response body base64-encoded. Recording appends; it never
//! rewrites existing entries, so a fixture file only grows.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct FixtureLine {
    digest: String,
    response: String,
}

pub struct FixtureStore {
    path: PathBuf,
    entries: RwLock<HashMap<String, Arc<Vec<u8>>>>,
    writer: Mutex<Option<File>>,
}

impl FixtureStore {
    /// Load an existing fixture file. Missing file is an error.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut entries = HashMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: FixtureLine = serde_json::from_str(&line).map_err(|e| {
                Error::InvalidArgument(format!(
                    "fixture {} line {}: {}",
                    path.display(),
                    idx + 1,
                    e
                ))
            })?;
            let bytes = BASE64.decode(parsed.response.as_bytes()).map_err(|e| {
                Error::InvalidArgument(format!(
                    "fixture {} line {}: bad base64: {}",
                    path.display(),
                    idx + 1,
                    e
                ))
            })?;
            entries.insert(parsed.digest, Arc::new(bytes));
        }
        Ok(FixtureStore {
            path: path.to_path_buf(),
            entries: RwLock::new(entries),
            writer: Mutex::new(None),
        })
    }

    /// Load if present, otherwise start empty (for record mode).
    pub fn load_or_empty(path: &Path) -> Result<Self> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(FixtureStore {
                path: path.to_path_buf(),
                entries: RwLock::new(HashMap::new()),
                writer: Mutex::new(None),
            })
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, digest: &str) -> Option<Arc<Vec<u8>>> {
        self.entries.read().unwrap().get(digest).cloned()
    }

    /// Append one entry and flush it. No-op if the digest is already present.
    pub fn append(&self, digest: &str, response: &[u8]) -> Result<()> {
        {
            let entries = self.entries.read().unwrap();
            if entries.contains_key(digest) {
                return Ok(());
            }
        }
        let mut writer = self.writer.lock().unwrap();
        if writer.is_none() {
            if let Some(parent) = self.path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)
                        .map_err(|e| Error::io(parent.display().to_string(), e))?;
                }
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&self.path)
                .map_err(|e| Error::io(self.path.display().to_string(), e))?;
            *writer = Some(file);
        }
        let line = serde_json::to_string(&FixtureLine {
            digest: digest.to_string(),
            response: BASE64.encode(response),
        })
        .expect("fixture line serializes");
        let file = writer.as_mut().unwrap();
        writeln!(file, "{line}").map_err(|e| Error::io(self.path.display().to_string(), e))?;
        file.flush()
            .map_err(|e| Error::io(self.path.display().to_string(), e))?;
        self.entries
            .write()
            .unwrap()
            .insert(digest.to_string(), Arc::new(response.to_vec()));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_then_reload_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        let store = FixtureStore::load_or_empty(&path).unwrap();
        store.append("d1", b"hello").unwrap();
        store.append("d2", b"\x00\x01binary").unwrap();
        // duplicate append is a no-op
        store.append("d1", b"other").unwrap();

        let reloaded = FixtureStore::load(&path).unwrap();
        assert_eq!(reloaded.len(), 2);
        assert_eq!(reloaded.get("d1").unwrap().as_slice(), b"hello");
        assert_eq!(reloaded.get("d2").unwrap().as_slice(), b"\x00\x01binary");
        assert!(reloaded.get("d3").is_none());
    }

    #[test]
    fn recording_never_shrinks_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        let store = FixtureStore::load_or_empty(&path).unwrap();
        store.append("a", b"1").unwrap();
        let size_one = std::fs::metadata(&path).unwrap().len();
        store.append("b", b"2").unwrap();
        let size_two = std::fs::metadata(&path).unwrap().len();
        assert!(size_two > size_one);

        // a second recording session over the same file only appends
        let again = FixtureStore::load_or_empty(&path).unwrap();
        again.append("a", b"1").unwrap();
        again.append("c", b"3").unwrap();
        let size_three = std::fs::metadata(&path).unwrap().len();
        assert!(size_three > size_two);
        assert_eq!(FixtureStore::load(&path).unwrap().len(), 3);
    }

    #[test]
    fn missing_file_is_an_error_for_strict_load() {
        let dir = tempfile::tempdir().unwrap();
        let err = FixtureStore::load(&dir.path().join("absent.jsonl"));
        assert!(err.is_err());
    }
}
