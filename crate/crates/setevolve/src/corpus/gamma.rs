//! The gamma(n) = n / ln |V_1 u ... u V_n| curve over a ranked document list
//! and its cutoff rule. A flattening derivative signals that new documents
//! stop contributing new entities; the cutoff additionally requires gamma to
//! clear a fixed threshold.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Half-width of the centered moving average applied to the raw derivative,
/// and the length of the trailing window the cutoff rule inspects.
const SMOOTHING_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct GammaPoint {
    /// Number of documents taken in (1-based rank).
    pub n: usize,
    /// Size of the running entity-set union.
    pub union_size: usize,
    /// n / ln(union_size); undefined while the union has at most one entity.
    pub gamma: Option<f64>,
    /// Smoothed centered finite difference of gamma; undefined at the ends
    /// and wherever gamma itself is undefined.
    pub gamma_prime: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaCurve {
    pub points: Vec<GammaPoint>,
}

impl GammaCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV export with header `n,unionSize,gamma,gammaPrime`; undefined
    /// values are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,unionSize,gamma,gammaPrime\n");
        for p in &self.points {
            let gamma = p.gamma.map_or(String::new(), |v| v.to_string());
            let prime = p.gamma_prime.map_or(String::new(), |v| v.to_string());
            out.push_str(&format!("{},{},{},{}\n", p.n, p.union_size, gamma, prime));
        }
        out
    }
}

/// Computes the curve over per-document entity sets in rank order.
pub fn gamma_curve(entity_sets: &[BTreeSet<String>]) -> Result<GammaCurve> {
    if entity_sets.is_empty() {
        return Err(Error::invalid("gamma curve needs at least one entity set"));
    }
    let mut union: BTreeSet<&str> = BTreeSet::new();
    let mut points: Vec<GammaPoint> = Vec::with_capacity(entity_sets.len());
    for (idx, set) in entity_sets.iter().enumerate() {
        union.extend(set.iter().map(String::as_str));
        let n = idx + 1;
        let union_size = union.len();
        let gamma = if union_size > 1 {
            Some(n as f64 / (union_size as f64).ln())
        } else {
            None
        };
        points.push(GammaPoint {
            n,
            union_size,
            gamma,
            gamma_prime: None,
        });
    }

    // centered finite differences of gamma, then a moving average of window 5
    let len = points.len();
    let mut raw = vec![None; len];
    for (i, w) in points.windows(3).enumerate() {
        if let (Some(prev), Some(next)) = (w[0].gamma, w[2].gamma) {
            raw[i + 1] = Some((next - prev) / 2.0);
        }
    }
    let half = SMOOTHING_WINDOW / 2;
    for (i, point) in points.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(len - 1);
        let window: Vec<f64> = raw[lo..=hi].iter().flatten().copied().collect();
        if !window.is_empty() {
            point.gamma_prime = Some(window.iter().sum::<f64>() / window.len() as f64);
        }
    }
    Ok(GammaCurve { points })
}

/// Smallest n whose trailing five points all have a defined derivative with
/// successive differences within `convergence_tol`, and whose gamma exceeds
/// `gamma_threshold`. `None` when no such n exists; callers may extend the
/// document list and retry.
pub fn select_cutoff(
    curve: &GammaCurve,
    gamma_threshold: f64,
    convergence_tol: f64,
) -> Option<usize> {
    let pts = &curve.points;
    for i in (SMOOTHING_WINDOW - 1)..pts.len() {
        let window = &pts[i + 1 - SMOOTHING_WINDOW..=i];
        if window.iter().any(|p| p.gamma_prime.is_none()) {
            continue;
        }
        let converged = window.windows(2).all(|w| {
            (w[1].gamma_prime.unwrap() - w[0].gamma_prime.unwrap()).abs() <= convergence_tol
        });
        let cleared = pts[i].gamma.is_some_and(|g| g > gamma_threshold);
        if converged && cleared {
            return Some(pts[i].n);
        }
    }
    None
}
