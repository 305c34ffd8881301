//! Observation panels: per-timestamp matrices of entity counts
//! (rows = documents/samples, columns = entities).

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-timestamp count matrices over a fixed entity set. Counts are stored as
/// `f64` and validated to be finite and nonnegative; integer-valued inputs are
/// preserved exactly, continuous inputs are accepted as-is.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPanel {
    timestamps: Vec<f64>,
    entity_names: Vec<String>,
    counts: Vec<Array2<f64>>,
}

impl ObservationPanel {
    pub fn new(
        timestamps: Vec<f64>,
        entity_names: Vec<String>,
        counts: Vec<Array2<f64>>,
    ) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::invalid("panel needs at least one timestamp"));
        }
        if timestamps.len() != counts.len() {
            return Err(Error::invalid(format!(
                "{} timestamps but {} count matrices",
                timestamps.len(),
                counts.len()
            )));
        }
        if timestamps.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("timestamps must be finite"));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("timestamps must be strictly increasing"));
        }
        let m = entity_names.len();
        if m == 0 {
            return Err(Error::invalid("panel needs at least one entity"));
        }
        for (t, c) in timestamps.iter().zip(&counts) {
            if c.ncols() != m {
                return Err(Error::invalid(format!(
                    "counts at t = {t} have {} columns, expected {m}",
                    c.ncols()
                )));
            }
            if c.nrows() == 0 {
                return Err(Error::invalid(format!("counts at t = {t} have no rows")));
            }
            if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!(
                    "counts at t = {t} must be finite and nonnegative"
                )));
            }
        }
        Ok(Self {
            timestamps,
            entity_names,
            counts,
        })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn counts(&self) -> &[Array2<f64>] {
        &self.counts
    }

    /// Total number of observation rows pooled across timestamps.
    pub fn total_samples(&self) -> usize {
        self.counts.iter().map(|c| c.nrows()).sum()
    }

    /// Extent of the evolving dimension; zero for a single timestamp.
    pub fn span(&self) -> f64 {
        self.timestamps.last().unwrap() - self.timestamps.first().unwrap()
    }

    /// A new panel restricted to the given entity columns (in the given order).
    pub fn select_entities(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::invalid("cannot select zero entities"));
        }
        if keep.iter().any(|&j| j >= self.num_entities()) {
            return Err(Error::invalid("entity index out of range"));
        }
        let names = keep.iter().map(|&j| self.entity_names[j].clone()).collect();
        let counts = self
            .counts
            .iter()
            .map(|c| {
                let mut out = Array2::<f64>::zeros((c.nrows(), keep.len()));
                for (new_j, &j) in keep.iter().enumerate() {
                    for i in 0..c.nrows() {
                        out[[i, new_j]] = c[[i, j]];
                    }
                }
                out
            })
            .collect();
        Self::new(self.timestamps.clone(), names, counts)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&PanelDto::from(self)).expect("panel serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: PanelDto = serde_json::from_str(text)
            .map_err(|e| Error::invalid(format!("panel JSON parse error: {e}")))?;
        dto.try_into()
    }
}

/// Wire format: counts are nested row arrays per timestamp.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PanelDto {
    timestamps: Vec<f64>,
    entity_names: Vec<String>,
    counts: Vec<Vec<Vec<f64>>>,
}

impl From<&ObservationPanel> for PanelDto {
    fn from(p: &ObservationPanel) -> Self {
        Self {
            timestamps: p.timestamps.clone(),
            entity_names: p.entity_names.clone(),
            counts: p
                .counts
                .iter()
                .map(|c| c.rows().into_iter().map(|r| r.to_vec()).collect())
                .collect(),
        }
    }
}

impl TryFrom<PanelDto> for ObservationPanel {
    type Error = Error;

    fn try_from(dto: PanelDto) -> Result<Self> {
        let m = dto.entity_names.len();
        let mut counts = Vec::with_capacity(dto.counts.len());
        for (t, rows) in dto.timestamps.iter().zip(&dto.counts) {
            let n = rows.len();
            let mut mat = Array2::<f64>::zeros((n, m));
            for (i, row) in rows.iter().enumerate() {
                if row.len() != m {
                    return Err(Error::invalid(format!(
                        "counts at t = {t}: row {i} has {} values, expected {m}",
                        row.len()
                    )));
                }
                for (j, v) in row.iter().enumerate() {
                    mat[[i, j]] = *v;
                }
            }
            counts.push(mat);
        }
        ObservationPanel::new(dto.timestamps, dto.entity_names, counts)
    }
}
