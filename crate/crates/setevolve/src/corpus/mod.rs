//! Text-corpus front end: BM25 retrieval over an inverted index, dictionary
//! entity linking, the gamma(n) document-cutoff curve, and panel assembly
//! bucketed along the evolving dimension.

pub mod gamma;
pub mod index;
pub mod linker;
pub mod window;

pub use gamma::{gamma_curve, select_cutoff, GammaCurve, GammaPoint};
pub use index::{bm25_rank, index_corpus, InvertedIndex};
pub use linker::{link_entities, EntityCounts, EntityVocabulary};
pub use window::{build_panel, PanelWarnings, WindowSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cutoff threshold on gamma(n).
pub const DEFAULT_GAMMA_THRESHOLD: f64 = 10.0;
/// Default tolerance on successive smoothed gamma'(n) differences.
pub const DEFAULT_CONVERGENCE_TOL: f64 = 0.01;

/// One corpus document: unique id, raw text, and its position on the
/// evolving dimension (year, rating, citation count, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub ordinal: f64,
}

/// Lowercases and splits on any non-alphanumeric character. No stemming,
/// no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Parses a JSONL corpus: one `{"id", "text", "ordinal"}` object per line.
/// Blank lines are skipped.
pub fn read_corpus_jsonl(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(line)
            .map_err(|e| Error::invalid(format!("corpus line {}: {e}", lineno + 1)))?;
        if !doc.ordinal.is_finite() {
            return Err(Error::invalid(format!(
                "corpus line {}: ordinal must be finite",
                lineno + 1
            )));
        }
        docs.push(doc);
    }
    Ok(docs)
}
