//! Inverted index and BM25 ranking.
//!
//! IDF uses the ln((N - df + 0.5) / (df + 0.5) + 1) variant, which stays
//! nonnegative even for terms present in most documents.

use std::collections::{BTreeMap, BTreeSet};

use super::{tokenize, Document};
use crate::error::{Error, Result};

/// Term postings with frequencies, plus per-document lengths, over an owned
/// document list. Immutable once built; queries never mutate it.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    documents: Vec<Document>,
    postings: BTreeMap<String, Vec<(usize, u32)>>,
    doc_lengths: Vec<usize>,
}

impl InvertedIndex {
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn doc_length(&self, idx: usize) -> usize {
        self.doc_lengths[idx]
    }

    pub fn term_frequency(&self, term: &str, idx: usize) -> u32 {
        self.postings
            .get(term)
            .and_then(|p| p.iter().find(|(d, _)| *d == idx))
            .map_or(0, |(_, tf)| *tf)
    }

    fn average_doc_length(&self) -> f64 {
        self.doc_lengths.iter().sum::<usize>() as f64 / self.documents.len() as f64
    }
}

/// Builds the inverted index. Document ids must be unique; the corpus must be
/// nonempty. Empty-text documents are indexed with length zero and can never
/// match a query.
pub fn index_corpus(documents: Vec<Document>) -> Result<InvertedIndex> {
    if documents.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    let mut seen = BTreeSet::new();
    for doc in &documents {
        if !seen.insert(doc.id.as_str()) {
            return Err(Error::invalid(format!(
                "duplicate document id '{}'",
                doc.id
            )));
        }
    }
    let mut postings: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
    let mut doc_lengths = Vec::with_capacity(documents.len());
    for (idx, doc) in documents.iter().enumerate() {
        let tokens = tokenize(&doc.text);
        doc_lengths.push(tokens.len());
        let mut freqs: BTreeMap<String, u32> = BTreeMap::new();
        for token in tokens {
            *freqs.entry(token).or_insert(0) += 1;
        }
        for (term, tf) in freqs {
            postings.entry(term).or_default().push((idx, tf));
        }
    }
    Ok(InvertedIndex {
        documents,
        postings,
        doc_lengths,
    })
}

/// BM25 ranking of the corpus against `query`: descending score, ties broken
/// by document id ascending, zero-score documents excluded.
pub fn bm25_rank<'a>(
    query: &str,
    index: &'a InvertedIndex,
    k1: f64,
    b: f64,
) -> Result<Vec<(&'a Document, f64)>> {
    let mut terms = tokenize(query);
    terms.dedup();
    let terms: BTreeSet<String> = terms.into_iter().collect();
    if terms.is_empty() {
        return Err(Error::invalid("query has no tokens"));
    }
    let n = index.len() as f64;
    let avgdl = index.average_doc_length();
    let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
    for term in &terms {
        let Some(postings) = index.postings.get(term) else {
            continue;
        };
        let df = postings.len() as f64;
        let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
        for &(idx, tf) in postings {
            let tf = tf as f64;
            let dl = index.doc_lengths[idx] as f64;
            let norm = tf + k1 * (1.0 - b + b * dl / avgdl);
            *scores.entry(idx).or_insert(0.0) += idf * tf * (k1 + 1.0) / norm;
        }
    }
    let mut ranked: Vec<(&Document, f64)> = scores
        .into_iter()
        .filter(|(_, score)| *score > 0.0)
        .map(|(idx, score)| (&index.documents[idx], score))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id)));
    Ok(ranked)
}
