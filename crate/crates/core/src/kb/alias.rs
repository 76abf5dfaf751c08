use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One `(entity, count)` pair recorded for a surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasEntry {
    pub entity_id: String,
    pub count: u64,
}

/// Surface-form dictionary keyed by normalized surface strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    entries: BTreeMap<String, Vec<AliasEntry>>,
}

/// Lowercases, collapses runs of whitespace to a single space and strips
/// punctuation from both ends.
pub fn normalize_surface(surface: &str) -> String {
    let lowered = surface.to_lowercase();
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds counts for `surface`. Surfaces that normalize to the same key are
    /// merged, summing counts of repeated entities.
    pub(crate) fn add(&mut self, surface: &str, entity_id: &str, count: u64) {
        let list = self.entries.entry(normalize_surface(surface)).or_default();
        match list.iter_mut().find(|e| e.entity_id == entity_id) {
            Some(e) => e.count += count,
            None => list.push(AliasEntry {
                entity_id: entity_id.to_string(),
                count,
            }),
        }
    }

    /// Entries for `surface` after normalization; empty when unknown.
    pub fn lookup(&self, surface: &str) -> &[AliasEntry] {
        self.entries
            .get(&normalize_surface(surface))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[AliasEntry])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}
