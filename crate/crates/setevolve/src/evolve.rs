//! Time-indexed precision-matrix series: kernel-weighted covariance around
//! each timestamp, one penalized solve per timestamp.
//!
//! The copula marginals are fitted once on data pooled across all timestamps;
//! the location term of the transform is dropped before covariance assembly
//! so the transformed vectors match the zero-mean model the estimator assumes.
//! Default hyperparameters follow the n^(-1/6) bandwidth and
//! n^(-1/6) log n sqrt(log m) penalty schedules.

use std::collections::BTreeSet;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glasso::{graphical_lasso, CovarianceMatrix, PrecisionEstimate, SolverOptions};
use crate::nonparanormal::{fit_copula, TransformedPanel};
use crate::panel::ObservationPanel;

/// Kernel family for covariance localization. Only the box kernel is defined;
/// the enumeration leaves room for others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Box,
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn boxcar(bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::invalid("bandwidth must be a positive real"));
        }
        Ok(Self {
            kind: KernelKind::Box,
            bandwidth,
        })
    }

    /// Unnormalized kernel value at distance `x >= 0`.
    fn evaluate(&self, x: f64) -> f64 {
        match self.kind {
            // 0.5 * indicator{ x/h in [-1, 1] }; the 0.5 cancels when weights
            // are normalized but keeps the kernel a density
            KernelKind::Box => {
                if x.abs() <= self.bandwidth {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }
}

/// Normalized kernel weights over `timestamps` for the estimation point `t`.
/// Weights are nonnegative and sum to one; if no timestamp falls within the
/// bandwidth the window is empty and an error is returned.
pub fn kernel_weights(t: f64, timestamps: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    let raw: Vec<f64> = timestamps
        .iter()
        .map(|t2| spec.evaluate((t - t2).abs()))
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyWindow { t });
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Kernel estimate of the second-moment matrix at `t`: rows within each
/// timestamp are averaged uniformly, then timestamps are combined with kernel
/// weights. The result is exactly symmetric by construction.
pub fn kernel_covariance(
    panel: &TransformedPanel,
    t: f64,
    spec: &KernelSpec,
) -> Result<CovarianceMatrix> {
    let weights = kernel_weights(t, &panel.timestamps, spec)?;
    let m = panel.num_variables();
    let mut s = Array2::<f64>::zeros((m, m));
    for (w, x) in weights.iter().zip(&panel.values) {
        if *w == 0.0 {
            continue;
        }
        let n_rows = x.nrows() as f64;
        let scale = w / n_rows;
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for r in 0..x.nrows() {
                    acc += x[[r, i]] * x[[r, j]];
                }
                s[[i, j]] += scale * acc;
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            s[[i, j]] = s[[j, i]];
        }
    }
    CovarianceMatrix::new(s)
}

/// Bandwidth schedule c_h * n^(-1/6), expressed as a fraction of the evolving
/// dimension's span and returned in absolute units. A degenerate span (single
/// timestamp) falls back to 1 so the bandwidth stays positive.
pub fn default_bandwidth(n: usize, c_h: f64, span: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("bandwidth schedule needs n >= 2"));
    }
    if !c_h.is_finite() || c_h <= 0.0 {
        return Err(Error::invalid("bandwidth constant must be > 0"));
    }
    if !span.is_finite() || span < 0.0 {
        return Err(Error::invalid("span must be finite and nonnegative"));
    }
    let span = if span == 0.0 { 1.0 } else { span };
    Ok(c_h * (n as f64).powf(-1.0 / 6.0) * span)
}

/// Penalty schedule c * n^(-1/6) * ln(n) * sqrt(ln(m)).
pub fn default_lambda(n: usize, m: usize, c: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid("penalty schedule needs n >= 2"));
    }
    if m < 2 {
        return Err(Error::invalid("penalty schedule needs m >= 2"));
    }
    if !c.is_finite() || c < 0.0 {
        return Err(Error::invalid("penalty constant must be >= 0"));
    }
    let nf = n as f64;
    Ok(c * nf.powf(-1.0 / 6.0) * nf.ln() * (m as f64).ln().sqrt())
}

/// Hyperparameters a series was estimated with: bandwidth h, penalty lambda,
/// and the penalty constant c when lambda came from the default schedule.
#[derive(Debug, Clone, Serialize)]
pub struct Hyperparameters {
    pub bandwidth: f64,
    pub lambda: f64,
    pub lambda_constant: Option<f64>,
}

/// Ordered sequence of precision estimates over the evolving dimension.
#[derive(Debug, Clone)]
pub struct NetworkSeries {
    pub timestamps: Vec<f64>,
    pub entity_names: Vec<String>,
    pub estimates: Vec<PrecisionEstimate>,
    pub hyperparameters: Hyperparameters,
    /// Entities dropped before estimation because their pooled counts were constant.
    pub rejected_entities: Vec<String>,
}

impl NetworkSeries {
    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    /// Edge sets per timestamp, in timestamp order.
    pub fn edge_sets(&self) -> Vec<&BTreeSet<(usize, usize)>> {
        self.estimates.iter().map(|e| &e.edges).collect()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct PerTimestamp<'a> {
            theta: Vec<f64>,
            edges: &'a BTreeSet<(usize, usize)>,
            lambda: f64,
            duality_gap: f64,
        }
        #[derive(Serialize)]
        #[serde(rename_all = "camelCase")]
        struct SeriesDto<'a> {
            timestamps: &'a [f64],
            entity_names: &'a [String],
            per_timestamp: Vec<PerTimestamp<'a>>,
        }
        let dto = SeriesDto {
            timestamps: &self.timestamps,
            entity_names: &self.entity_names,
            per_timestamp: self
                .estimates
                .iter()
                .map(|e| PerTimestamp {
                    theta: e.theta.iter().copied().collect(), // row-major
                    edges: &e.edges,
                    lambda: e.lambda,
                    duality_gap: e.duality_gap,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&dto).expect("series serializes")
    }

    /// DOT graph for one timestamp: nodes labeled by entity names, edges
    /// weighted by |theta_ij| to six decimal places.
    pub fn to_dot(&self, index: usize) -> String {
        let est = &self.estimates[index];
        let mut out = String::new();
        out.push_str(&format!("graph \"t={}\" {{\n", self.timestamps[index]));
        for name in &self.entity_names {
            out.push_str(&format!("  {};\n", dot_quote(name)));
        }
        for &(i, j) in &est.edges {
            out.push_str(&format!(
                "  {} -- {} [weight={:.6}];\n",
                dot_quote(&self.entity_names[i]),
                dot_quote(&self.entity_names[j]),
                est.theta[[i, j]].abs()
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn dot_quote(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Full pipeline over a panel: fit the pooled copula, drop rejected
/// variables, transform, and solve one penalized problem per timestamp.
/// Solver and window errors are tagged with the offending timestamp.
pub fn estimate_series(
    panel: &ObservationPanel,
    spec: &KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<NetworkSeries> {
    let model = fit_copula(panel)?;
    let retained = model.retained();
    if retained.is_empty() {
        return Err(Error::invalid(
            "all variables rejected: every entity has constant counts",
        ));
    }
    let rejected_entities: Vec<String> = model
        .rejected()
        .iter()
        .map(|&j| panel.entity_names()[j].clone())
        .collect();
    let sub_panel = panel.select_entities(&retained)?;
    let sub_model = fit_copula(&sub_panel)?;
    let transformed = sub_model.transform_centered(&sub_panel)?;

    let mut estimates = Vec::with_capacity(panel.timestamps().len());
    for &t in panel.timestamps() {
        let s = kernel_covariance(&transformed, t, spec).map_err(|e| Error::at_timestamp(t, e))?;
        let est = graphical_lasso(&s, lambda, opts).map_err(|e| Error::at_timestamp(t, e))?;
        estimates.push(est);
    }
    Ok(NetworkSeries {
        timestamps: panel.timestamps().to_vec(),
        entity_names: sub_panel.entity_names().to_vec(),
        estimates,
        hyperparameters: Hyperparameters {
            bandwidth: spec.bandwidth,
            lambda,
            lambda_constant: None,
        },
        rejected_entities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn boxcar(h: f64) -> KernelSpec {
        KernelSpec::boxcar(h).unwrap()
    }

    #[test]
    fn box_weights_cover_all_within_bandwidth() {
        let w = kernel_weights(3.0, &[1.0, 2.0, 3.0, 4.0, 5.0], &boxcar(2.0)).unwrap();
        for v in &w {
            assert_abs_diff_eq!(*v, 0.2, epsilon = 1e-15);
        }
    }

    #[test]
    fn box_weights_exclude_beyond_bandwidth() {
        let w = kernel_weights(1.0, &[1.0, 2.0, 3.0], &boxcar(1.0)).unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-15);
        assert_eq!(w[2], 0.0);
    }

    #[test]
    fn single_timestamp_weight_is_one() {
        let w = kernel_weights(7.0, &[7.0], &boxcar(0.25)).unwrap();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn empty_window_errors() {
        assert!(matches!(
            kernel_weights(10.0, &[1.0, 2.0], &boxcar(0.5)),
            Err(Error::EmptyWindow { .. })
        ));
    }

    #[test]
    fn covariance_of_single_row_is_outer_product() {
        let panel = TransformedPanel {
            timestamps: vec![1.0],
            values: vec![array![[1.0, 2.0]]],
        };
        let s = kernel_covariance(&panel, 1.0, &boxcar(1.0)).unwrap();
        assert_eq!(s.entries(), &array![[1.0, 2.0], [2.0, 4.0]]);
    }

    #[test]
    fn covariance_of_identical_rows_across_timestamps() {
        let panel = TransformedPanel {
            timestamps: vec![1.0, 2.0],
            values: vec![array![[1.0, 2.0]], array![[1.0, 2.0]]],
        };
        let s = kernel_covariance(&panel, 1.5, &boxcar(2.0)).unwrap();
        assert_eq!(s.entries(), &array![[1.0, 2.0], [2.0, 4.0]]);
    }

    #[test]
    fn covariance_of_orthogonal_rows() {
        let panel = TransformedPanel {
            timestamps: vec![1.0, 2.0],
            values: vec![array![[1.0, 0.0]], array![[0.0, 1.0]]],
        };
        let s = kernel_covariance(&panel, 1.5, &boxcar(2.0)).unwrap();
        assert_eq!(s.entries(), &array![[0.5, 0.0], [0.0, 0.5]]);
    }

    #[test]
    fn bandwidth_schedule_values() {
        // 64^(-1/6) = 0.5 and 1e6^(-1/6) = 0.1, exactly
        assert_abs_diff_eq!(
            default_bandwidth(64, 1.0, 1.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            default_bandwidth(1_000_000, 1.0, 1.0).unwrap(),
            0.1,
            epsilon = 1e-15
        );
        assert!(default_bandwidth(64, 0.0, 1.0).is_err());
        assert!(default_bandwidth(1, 1.0, 1.0).is_err());
        // degenerate span falls back to unit span
        assert_abs_diff_eq!(
            default_bandwidth(64, 1.0, 0.0).unwrap(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn lambda_schedule_values() {
        // 40-digit evaluation of 64^(-1/6) ln(64) sqrt(ln 7)
        assert_abs_diff_eq!(
            default_lambda(64, 7, 1.0).unwrap(),
            2.900_735_348_726_039_3,
            epsilon = 1e-12
        );
        assert_eq!(default_lambda(64, 7, 0.0).unwrap(), 0.0);
        assert!(default_lambda(64, 1, 1.0).is_err());
        assert!(default_lambda(1, 7, 1.0).is_err());
    }

    #[test]
    fn constant_panel_is_rejected() {
        let counts = vec![array![[1.0, 1.0], [1.0, 1.0]]];
        let panel = ObservationPanel::new(vec![0.0], vec!["a".into(), "b".into()], counts).unwrap();
        let err = estimate_series(&panel, &boxcar(1.0), 0.1, &SolverOptions::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejected_variables_are_dropped_and_reported() {
        let counts = vec![array![
            [5.0, 1.0, 0.0],
            [5.0, 2.0, 1.0],
            [5.0, 0.0, 2.0],
            [5.0, 3.0, 1.0]
        ]];
        let panel = ObservationPanel::new(
            vec![0.0],
            vec!["const".into(), "x".into(), "y".into()],
            counts,
        )
        .unwrap();
        let series = estimate_series(&panel, &boxcar(1.0), 0.5, &SolverOptions::default()).unwrap();
        assert_eq!(series.rejected_entities, vec!["const".to_string()]);
        assert_eq!(series.entity_names, vec!["x".to_string(), "y".to_string()]);
        assert_eq!(series.estimates.len(), 1);
    }

    #[test]
    fn dot_export_shape() {
        let theta = array![[1.0, -0.5], [-0.5, 1.0]];
        let est = PrecisionEstimate {
            edges: crate::glasso::support_edges(&theta, 1e-6),
            theta,
            lambda: 0.1,
            objective: 0.0,
            duality_gap: 0.0,
            iterations: 1,
        };
        let series = NetworkSeries {
            timestamps: vec![3.5],
            entity_names: vec!["alpha".into(), "beta".into()],
            estimates: vec![est],
            hyperparameters: Hyperparameters {
                bandwidth: 1.0,
                lambda: 0.1,
                lambda_constant: None,
            },
            rejected_entities: vec![],
        };
        let dot = series.to_dot(0);
        assert!(dot.starts_with("graph \"t=3.5\" {"));
        assert!(dot.contains("\"alpha\" -- \"beta\" [weight=0.500000];"));
        let json = series.to_json();
        assert!(json.contains("\"perTimestamp\""));
        assert!(json.contains("\"dualityGap\""));
    }

    fn chain_theta(m: usize) -> ndarray::Array2<f64> {
        let mut theta = ndarray::Array2::<f64>::zeros((m, m));
        for i in 0..m - 1 {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            theta[[i, i + 1]] = 0.3 * sign;
            theta[[i + 1, i]] = 0.3 * sign;
        }
        for i in 0..m {
            let row: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| theta[[i, j]].abs())
                .sum();
            theta[[i, i]] = row + 0.5;
        }
        theta
    }

    #[test]
    fn recovers_chain_support_from_discrete_panel() {
        use crate::synthbench::{sample_observations, EvolutionKind, GroundTruthSeries};
        let theta = chain_theta(3);
        let truth =
            GroundTruthSeries::from_regimes(theta.clone(), theta, 5, 1, EvolutionKind::Local)
                .unwrap();
        // n = 1000 pooled over 5 timestamps, kernel covering all of them
        let panel = sample_observations(&truth, 200, 10, 4).unwrap();
        let lambda = default_lambda(1000, 3, 0.4).unwrap();
        let series =
            estimate_series(&panel, &boxcar(10.0), lambda, &SolverOptions::default()).unwrap();
        let want: std::collections::BTreeSet<(usize, usize)> =
            [(0, 1), (1, 2)].into_iter().collect();
        for est in &series.estimates {
            assert_eq!(est.edges, want);
        }
    }

    #[test]
    fn all_covering_kernel_reproduces_static_baseline_exactly() {
        use crate::synthbench::{
            generate_ground_truth, sample_observations, static_baseline, EvolutionKind,
        };
        let truth = generate_ground_truth(6, 8, EvolutionKind::Global, 4, 0.2, 17).unwrap();
        let panel = sample_observations(&truth, 12, 10, 17).unwrap();
        let lambda = 0.8;
        let opts = SolverOptions::default();
        let spec = boxcar(panel.span() + 1.0);
        let series = estimate_series(&panel, &spec, lambda, &opts).unwrap();
        let pooled = static_baseline(&panel, lambda, &opts).unwrap();
        for est in &series.estimates {
            assert_eq!(est.edges, pooled.edges);
            for (a, b) in est.theta.iter().zip(pooled.theta.iter()) {
                assert_eq!(
                    a, b,
                    "all-covering kernel must match pooled solve bit-exactly"
                );
            }
        }
    }

    #[test]
    fn single_timestamp_series_matches_static_baseline() {
        use crate::synthbench::static_baseline;
        let counts = vec![array![
            [1.0, 0.0, 2.0],
            [2.0, 1.0, 0.0],
            [0.0, 2.0, 1.0],
            [3.0, 1.0, 2.0],
            [1.0, 2.0, 0.0]
        ]];
        let panel =
            ObservationPanel::new(vec![7.0], vec!["a".into(), "b".into(), "c".into()], counts)
                .unwrap();
        let opts = SolverOptions::default();
        let series = estimate_series(&panel, &boxcar(1.0), 0.3, &opts).unwrap();
        let pooled = static_baseline(&panel, 0.3, &opts).unwrap();
        assert_eq!(series.estimates.len(), 1);
        for (a, b) in series.estimates[0].theta.iter().zip(pooled.theta.iter()) {
            assert_eq!(a, b);
        }
    }

    proptest! {
        #[test]
        fn weights_normalize_and_localize(
            times in proptest::collection::btree_set(-50i32..50, 1..12),
            t in -60i32..60,
            h in 1u32..40,
        ) {
            let times: Vec<f64> = times.into_iter().map(f64::from).collect();
            let t = f64::from(t);
            let h = f64::from(h) / 2.0;
            match kernel_weights(t, &times, &boxcar(h)) {
                Ok(w) => {
                    prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                    for (weight, ts) in w.iter().zip(&times) {
                        prop_assert!(*weight >= 0.0);
                        if (t - ts).abs() > h {
                            prop_assert_eq!(*weight, 0.0);
                        }
                    }
                }
                Err(Error::EmptyWindow { .. }) => {
                    prop_assert!(times.iter().all(|ts| (t - ts).abs() > h));
                }
                Err(e) => prop_assert!(false, "unexpected error {:?}", e),
            }
        }
    }
}
