//! Bucketing documents along the evolving dimension and assembling the
//! observation panel: one timestamp per window, one row per document.

use std::collections::BTreeSet;

use ndarray::Array2;

use super::{Document, EntityCounts};
use crate::error::{Error, Result};
use crate::panel::ObservationPanel;

/// Equal-width half-open windows [start + k*w, start + (k+1)*w), each labeled
/// by its midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub start: f64,
    pub width: f64,
    pub count: usize,
}

impl WindowSpec {
    pub fn new(start: f64, width: f64, count: usize) -> Result<Self> {
        if !start.is_finite() || !width.is_finite() {
            return Err(Error::invalid("window start and width must be finite"));
        }
        if width <= 0.0 {
            return Err(Error::invalid("window width must be > 0"));
        }
        if count == 0 {
            return Err(Error::invalid("window count must be >= 1"));
        }
        Ok(Self {
            start,
            width,
            count,
        })
    }

    /// Smallest window sequence of the given width starting at `min` that
    /// contains `max`.
    pub fn covering(min: f64, max: f64, width: f64) -> Result<Self> {
        if !min.is_finite() || !max.is_finite() || max < min {
            return Err(Error::invalid("window range is empty"));
        }
        if !width.is_finite() || width <= 0.0 {
            return Err(Error::invalid("window width must be > 0"));
        }
        let count = ((max - min) / width).floor() as usize + 1;
        Self::new(min, width, count)
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.start + (k as f64 + 0.5) * self.width
    }

    /// Window index containing `ordinal`, or `None` if it falls outside.
    pub fn bucket(&self, ordinal: f64) -> Option<usize> {
        if !ordinal.is_finite() || ordinal < self.start {
            return None;
        }
        let k = ((ordinal - self.start) / self.width).floor() as usize;
        (k < self.count).then_some(k)
    }
}

/// Documents that could not be placed and windows that ended up empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PanelWarnings {
    /// Ids of documents whose ordinal fell outside the window spec.
    pub excluded_documents: Vec<String>,
    /// Midpoints of windows containing no documents (dropped from the panel).
    pub empty_windows: Vec<f64>,
}

/// Assembles the observation panel for the selected documents over the
/// entity set `entity_set` (columns in sorted id order). `counts[i]` must be
/// the link counts of `documents[i]`; entities outside the set are ignored.
/// Empty windows are dropped with a warning record; a panel with no surviving
/// window is an error.
pub fn build_panel(
    documents: &[Document],
    counts: &[EntityCounts],
    entity_set: &BTreeSet<String>,
    window: &WindowSpec,
) -> Result<(ObservationPanel, PanelWarnings)> {
    if documents.len() != counts.len() {
        return Err(Error::invalid(format!(
            "{} documents but {} count maps",
            documents.len(),
            counts.len()
        )));
    }
    if entity_set.is_empty() {
        return Err(Error::invalid("entity set is empty"));
    }
    let columns: Vec<&String> = entity_set.iter().collect();
    let mut warnings = PanelWarnings::default();
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); window.count];
    for (i, doc) in documents.iter().enumerate() {
        match window.bucket(doc.ordinal) {
            Some(k) => buckets[k].push(i),
            None => warnings.excluded_documents.push(doc.id.clone()),
        }
    }

    let mut timestamps = Vec::new();
    let mut matrices = Vec::new();
    for (k, bucket) in buckets.iter().enumerate() {
        if bucket.is_empty() {
            warnings.empty_windows.push(window.midpoint(k));
            continue;
        }
        let mut mat = Array2::<f64>::zeros((bucket.len(), columns.len()));
        for (row, &doc_idx) in bucket.iter().enumerate() {
            for (col, entity) in columns.iter().enumerate() {
                if let Some(c) = counts[doc_idx].get(*entity) {
                    mat[[row, col]] = f64::from(*c);
                }
            }
        }
        timestamps.push(window.midpoint(k));
        matrices.push(mat);
    }
    if timestamps.is_empty() {
        return Err(Error::invalid("all windows are empty"));
    }
    let names = columns.into_iter().cloned().collect();
    let panel = ObservationPanel::new(timestamps, names, matrices)?;
    Ok((panel, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, ordinal: f64) -> Document {
        Document {
            id: id.into(),
            text: String::new(),
            ordinal,
        }
    }

    fn counts(pairs: &[(&str, u32)]) -> EntityCounts {
        pairs.iter().map(|(e, c)| (e.to_string(), *c)).collect()
    }

    fn entity_set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn covering_spans_inclusive_range() {
        // width 5 over 1985..=2015 needs 7 windows, first midpoint 1987.5
        let w = WindowSpec::covering(1985.0, 2015.0, 5.0).unwrap();
        assert_eq!(w.count, 7);
        assert_eq!(w.midpoint(0), 1987.5);
        assert_eq!(w.midpoint(6), 2017.5);
        assert_eq!(w.bucket(2015.0), Some(6));
        assert_eq!(w.bucket(1984.9), None);
        assert_eq!(w.bucket(2020.0), None);
    }

    #[test]
    fn panel_rows_follow_document_order() {
        let docs = vec![doc("a", 1990.0), doc("b", 1991.0)];
        let c = vec![counts(&[("e1", 2)]), counts(&[("e2", 1)])];
        let w = WindowSpec::covering(1990.0, 1991.0, 5.0).unwrap();
        let (panel, warn) = build_panel(&docs, &c, &entity_set(&["e1", "e2"]), &w).unwrap();
        assert_eq!(panel.timestamps(), &[1992.5]);
        assert_eq!(panel.counts()[0], ndarray::array![[2.0, 0.0], [0.0, 1.0]]);
        assert_eq!(warn, PanelWarnings::default());
    }

    #[test]
    fn out_of_range_documents_are_excluded_with_warning() {
        let docs = vec![doc("in", 1990.0), doc("out", 2100.0)];
        let c = vec![counts(&[("e1", 1)]), counts(&[("e1", 5)])];
        let w = WindowSpec::new(1990.0, 5.0, 2).unwrap();
        let (panel, warn) = build_panel(&docs, &c, &entity_set(&["e1"]), &w).unwrap();
        assert_eq!(warn.excluded_documents, vec!["out".to_string()]);
        assert_eq!(panel.total_samples(), 1);
    }

    #[test]
    fn empty_windows_are_dropped_with_warning() {
        let docs = vec![doc("a", 1990.0), doc("b", 2002.0)];
        let c = vec![counts(&[("e1", 1)]), counts(&[("e1", 2)])];
        let w = WindowSpec::covering(1990.0, 2002.0, 5.0).unwrap();
        let (panel, warn) = build_panel(&docs, &c, &entity_set(&["e1"]), &w).unwrap();
        assert_eq!(panel.timestamps().len(), 2);
        assert_eq!(warn.empty_windows, vec![1997.5]);
    }

    #[test]
    fn all_windows_empty_is_an_error() {
        let docs = vec![doc("a", 100.0)];
        let c = vec![counts(&[("e1", 1)])];
        let w = WindowSpec::new(0.0, 1.0, 3).unwrap();
        assert!(build_panel(&docs, &c, &entity_set(&["e1"]), &w).is_err());
    }

    #[test]
    fn entities_outside_set_are_ignored() {
        let docs = vec![doc("a", 0.5)];
        let c = vec![counts(&[("e1", 1), ("stranger", 9)])];
        let w = WindowSpec::new(0.0, 1.0, 1).unwrap();
        let (panel, _) = build_panel(&docs, &c, &entity_set(&["e1", "e2"]), &w).unwrap();
        assert_eq!(panel.counts()[0], ndarray::array![[1.0, 0.0]]);
    }
}
