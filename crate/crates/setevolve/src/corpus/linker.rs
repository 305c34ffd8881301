//! Dictionary entity linking: greedy longest-match over the case-normalized
//! token stream. Matches never overlap; at each position the longest known
//! surface form wins.

use std::collections::BTreeMap;

use super::{tokenize, Document};
use crate::error::{Error, Result};

/// Entity occurrence counts keyed by entity id.
pub type EntityCounts = BTreeMap<String, u32>;

/// Surface form (token sequence) to entity id. Several surfaces may map to
/// the same entity; multi-word surfaces are matched greedily.
#[derive(Debug, Clone)]
pub struct EntityVocabulary {
    entries: BTreeMap<Vec<String>, String>,
    max_len: usize,
}

impl EntityVocabulary {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut max_len = 0;
        for (surface, entity) in pairs {
            let tokens = tokenize(&surface);
            if tokens.is_empty() {
                return Err(Error::invalid(format!(
                    "vocabulary surface form '{surface}' has no tokens"
                )));
            }
            if entity.trim().is_empty() {
                return Err(Error::invalid(format!(
                    "vocabulary surface form '{surface}' maps to an empty entity id"
                )));
            }
            max_len = max_len.max(tokens.len());
            entries.insert(tokens, entity);
        }
        if entries.is_empty() {
            return Err(Error::invalid("vocabulary is empty"));
        }
        Ok(Self { entries, max_len })
    }

    /// Parses "surface<TAB>entityId" lines; blank lines are skipped.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let Some((surface, entity)) = line.split_once('\t') else {
                return Err(Error::invalid(format!(
                    "vocabulary line {}: expected 'surface<TAB>entityId'",
                    lineno + 1
                )));
            };
            pairs.push((surface.to_owned(), entity.trim().to_owned()));
        }
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct entity ids, sorted.
    pub fn entity_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.values().cloned().collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Counts entity occurrences in a document. Pure function of (text, vocab).
pub fn link_entities(document: &Document, vocab: &EntityVocabulary) -> EntityCounts {
    let tokens = tokenize(&document.text);
    let mut counts = EntityCounts::new();
    let mut i = 0;
    while i < tokens.len() {
        let limit = vocab.max_len.min(tokens.len() - i);
        let mut matched = false;
        for len in (1..=limit).rev() {
            if let Some(entity) = vocab.entries.get(&tokens[i..i + len]) {
                *counts.entry(entity.clone()).or_insert(0) += 1;
                i += len;
                matched = true;
                break;
            }
        }
        if !matched {
            i += 1;
        }
    }
    counts
}
