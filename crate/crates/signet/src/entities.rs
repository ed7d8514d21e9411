//! Entity resolution: map raw organization mentions to canonical entities
//! via normalization and an alias table.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::digest::slugify;
use crate::error::{Error, Result};
use crate::gateway::MentionResult;

const CORPORATE_SUFFIXES: &[&str] = &["inc", "inc.", "corp", "corp.", "ltd", "llc", "co."];

/// Casefold, strip edge punctuation, drop trailing corporate suffixes, and
/// collapse internal whitespace. Idempotent.
pub fn normalize_surface(surface: &str) -> String {
    // one pass can expose new trailing punctuation (e.g. "x:." -> "x:"),
    // so run to a fixpoint; each pass only ever shrinks the string
    let mut current = normalize_once(surface);
    loop {
        let next = normalize_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn normalize_once(surface: &str) -> String {
    let lowered = surface.to_lowercase();
    let mut words: Vec<&str> = lowered
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation() && c != '.'))
        .filter(|w| !w.is_empty())
        .collect();
    while let Some(last) = words.last() {
        if words.len() > 1 && CORPORATE_SUFFIXES.contains(last) {
            words.pop();
        } else {
            break;
        }
    }
    let joined = words.join(" ");
    // a trailing dot survives only as part of a kept suffix word
    joined.trim_end_matches('.').trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalEntity {
    /// Lowercase slug, unique within a table.
    pub id: String,
    pub display_name: String,
    pub aliases: BTreeSet<String>,
    #[serde(default)]
    pub ticker: Option<String>,
}

impl CanonicalEntity {
    pub fn new(
        id: impl Into<String>,
        display_name: impl Into<String>,
        aliases: impl IntoIterator<Item = String>,
        ticker: Option<String>,
    ) -> Self {
        let display_name = display_name.into();
        let mut aliases: BTreeSet<String> = aliases.into_iter().collect();
        aliases.insert(display_name.clone());
        CanonicalEntity {
            id: id.into(),
            display_name,
            aliases,
            ticker,
        }
    }
}

/// Two entities claiming the same normalized alias.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AliasConflict {
    pub alias: String,
    pub first: String,
    pub second: String,
}

/// Report every normalized alias claimed by more than one entity, and any
/// malformed entity id.
pub fn validate_entities(entities: &[CanonicalEntity]) -> Vec<AliasConflict> {
    let mut claims: HashMap<String, &str> = HashMap::new();
    let mut conflicts = Vec::new();
    for entity in entities {
        for alias in &entity.aliases {
            let normalized = normalize_surface(alias);
            if normalized.is_empty() {
                continue;
            }
            match claims.get(normalized.as_str()) {
                Some(existing) if *existing != entity.id => conflicts.push(AliasConflict {
                    alias: normalized.clone(),
                    first: (*existing).to_string(),
                    second: entity.id.clone(),
                }),
                _ => {
                    claims.insert(normalized, &entity.id);
                }
            }
        }
    }
    conflicts.sort_by(|a, b| a.alias.cmp(&b.alias));
    conflicts
}

fn valid_entity_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

/// Immutable lookup from normalized surface to canonical entity id.
#[derive(Debug, Clone)]
pub struct AliasTable {
    entities: Vec<CanonicalEntity>,
    index: HashMap<String, String>,
}

impl AliasTable {
    pub fn from_entities(entities: Vec<CanonicalEntity>) -> Result<Self> {
        let mut seen_ids = BTreeSet::new();
        for entity in &entities {
            if !valid_entity_id(&entity.id) {
                return Err(Error::InvalidArgument(format!(
                    "entity id `{}` is not a lowercase slug",
                    entity.id
                )));
            }
            if !seen_ids.insert(entity.id.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate entity id `{}`",
                    entity.id
                )));
            }
        }
        let conflicts = validate_entities(&entities);
        if !conflicts.is_empty() {
            let c = &conflicts[0];
            return Err(Error::InvalidArgument(format!(
                "alias `{}` is claimed by both `{}` and `{}` ({} conflict(s) total)",
                c.alias,
                c.first,
                c.second,
                conflicts.len()
            )));
        }
        let mut index = HashMap::new();
        for entity in &entities {
            for alias in &entity.aliases {
                let normalized = normalize_surface(alias);
                if !normalized.is_empty() {
                    index.insert(normalized, entity.id.clone());
                }
            }
        }
        Ok(AliasTable { entities, index })
    }

    /// Load a JSON array of entities, validating as it goes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let entities: Vec<CanonicalEntity> = serde_json::from_slice(&bytes)
            .map_err(|e| Error::InvalidArgument(format!("{}: {}", path.display(), e)))?;
        // display_name membership in aliases holds by construction
        let entities = entities
            .into_iter()
            .map(|e| CanonicalEntity::new(e.id, e.display_name, e.aliases, e.ticker))
            .collect();
        Self::from_entities(entities)
    }

    pub fn entities(&self) -> &[CanonicalEntity] {
        &self.entities
    }

    pub fn lookup(&self, surface: &str) -> Option<&str> {
        self.index.get(&normalize_surface(surface)).map(String::as_str)
    }

    pub fn entity(&self, id: &str) -> Option<&CanonicalEntity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Exact normalized-surface lookup; a miss is the `Unresolved` value,
    /// never a fuzzy guess.
    pub fn resolve(&self, mention: &MentionResult) -> ResolvedMention {
        let resolution = match self.lookup(&mention.surface) {
            Some(id) => Resolution::Entity(id.to_string()),
            None => Resolution::Unresolved(normalize_surface(&mention.surface)),
        };
        ResolvedMention {
            mention: mention.clone(),
            resolution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Resolution {
    /// Canonical entity id from the alias table.
    Entity(String),
    /// No table entry; carries the normalized surface.
    Unresolved(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedMention {
    pub mention: MentionResult,
    pub resolution: Resolution,
}

impl ResolvedMention {
    pub fn is_resolved(&self) -> bool {
        matches!(self.resolution, Resolution::Entity(_))
    }

    /// Graph node id: the canonical id, or a slug of the normalized surface
    /// for unresolved mentions.
    pub fn node_id(&self) -> String {
        match &self.resolution {
            Resolution::Entity(id) => id.clone(),
            Resolution::Unresolved(normalized) => slugify(normalized),
        }
    }
}
