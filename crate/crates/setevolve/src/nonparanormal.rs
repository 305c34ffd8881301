//! Winsorized Gaussian copula transform for discrete observation panels.
//!
//! Each variable's pooled empirical distribution is estimated once across all
//! timestamps (stationary-marginal assumption), then every count x maps to
//! u_j + sigma_j * PhiInv(F_j(x)), where F_j is the empirical CDF clamped into
//! [delta_n, 1 - delta_n] with delta_n = 1 / (4 n^(1/4) sqrt(pi ln n)). The
//! clamp keeps normal quantiles finite for every input, including values never
//! seen during fitting.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::normal::inverse_normal_cdf;
use crate::panel::ObservationPanel;

/// Empirical marginal of one variable: pooled moments and sorted samples.
#[derive(Debug, Clone)]
pub struct VariableMarginal {
    pub mean: f64,
    /// Population standard deviation (divide by n); exactly 0 for a variable
    /// that was rejected as constant.
    pub sd: f64,
    pub sorted_samples: Vec<f64>,
}

/// Fitted per-variable marginals plus the shared Winsorization bound.
#[derive(Debug, Clone)]
pub struct CopulaModel {
    variables: Vec<VariableMarginal>,
    rejected: Vec<usize>,
    delta_n: f64,
    total_samples: usize,
    entity_names: Vec<String>,
}

/// Real-valued panel produced by the copula transform; same shape as the
/// observation panel it came from.
#[derive(Debug, Clone)]
pub struct TransformedPanel {
    pub timestamps: Vec<f64>,
    pub values: Vec<Array2<f64>>,
}

impl TransformedPanel {
    pub fn num_variables(&self) -> usize {
        self.values.first().map_or(0, |v| v.ncols())
    }
}

/// Fits pooled marginals for every variable. Variables whose pooled samples
/// are constant get `sd = 0` and land in the rejected list; they are excluded
/// from downstream estimation but remain addressable for transforms.
pub fn fit_copula(panel: &ObservationPanel) -> Result<CopulaModel> {
    let n = panel.total_samples();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "copula fit needs at least 2 pooled samples, got {n}"
        )));
    }
    let m = panel.num_entities();
    let mut variables = Vec::with_capacity(m);
    let mut rejected = Vec::new();
    for j in 0..m {
        let mut samples: Vec<f64> = Vec::with_capacity(n);
        for counts in panel.counts() {
            for i in 0..counts.nrows() {
                samples.push(counts[[i, j]]);
            }
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let constant = samples[0] == samples[n - 1];
        let mean = samples.iter().sum::<f64>() / n as f64;
        let sd = if constant {
            rejected.push(j);
            0.0
        } else {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
        };
        variables.push(VariableMarginal {
            mean,
            sd,
            sorted_samples: samples,
        });
    }
    Ok(CopulaModel {
        variables,
        rejected,
        delta_n: delta_n(n),
        total_samples: n,
        entity_names: panel.entity_names().to_vec(),
    })
}

/// delta_n = 1 / (4 n^(1/4) sqrt(pi ln n)), natural log.
pub fn delta_n(n: usize) -> f64 {
    let nf = n as f64;
    1.0 / (4.0 * nf.powf(0.25) * (std::f64::consts::PI * nf.ln()).sqrt())
}

impl CopulaModel {
    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn variable(&self, j: usize) -> &VariableMarginal {
        &self.variables[j]
    }

    /// Indices of variables rejected as constant.
    pub fn rejected(&self) -> &[usize] {
        &self.rejected
    }

    /// Indices of variables retained for estimation, in order.
    pub fn retained(&self) -> Vec<usize> {
        (0..self.variables.len())
            .filter(|j| !self.rejected.contains(j))
            .collect()
    }

    pub fn delta(&self) -> f64 {
        self.delta_n
    }

    pub fn total_samples(&self) -> usize {
        self.total_samples
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    /// Empirical CDF (#samples <= x) / n clamped into [delta_n, 1 - delta_n].
    pub fn winsorized_cdf(&self, j: usize, x: f64) -> f64 {
        let samples = &self.variables[j].sorted_samples;
        let count = samples.partition_point(|s| *s <= x);
        let raw = count as f64 / self.total_samples as f64;
        raw.clamp(self.delta_n, 1.0 - self.delta_n)
    }

    /// u_j + sigma_j * PhiInv(F_j(x)) for a single value.
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let v = &self.variables[j];
        v.mean + v.sd * inverse_normal_cdf(self.winsorized_cdf(j, x))
    }

    fn transform_impl(
        &self,
        panel: &ObservationPanel,
        include_mean: bool,
    ) -> Result<TransformedPanel> {
        if panel.entity_names() != self.entity_names.as_slice() {
            return Err(Error::invalid(
                "panel variables do not match the fitted copula model",
            ));
        }
        let values = panel
            .counts()
            .iter()
            .map(|counts| {
                let mut out = counts.clone();
                for j in 0..counts.ncols() {
                    let v = &self.variables[j];
                    let shift = if include_mean { v.mean } else { 0.0 };
                    for i in 0..counts.nrows() {
                        let z = inverse_normal_cdf(self.winsorized_cdf(j, counts[[i, j]]));
                        out[[i, j]] = shift + v.sd * z;
                    }
                }
                out
            })
            .collect();
        Ok(TransformedPanel {
            timestamps: panel.timestamps().to_vec(),
            values,
        })
    }

    /// Transforms every entry of the panel to u_j + sigma_j * PhiInv(F_j(x)).
    pub fn transform(&self, panel: &ObservationPanel) -> Result<TransformedPanel> {
        self.transform_impl(panel, true)
    }

    /// Transform with the location term dropped: sigma_j * PhiInv(F_j(x)).
    /// This is the version fed to covariance estimation, where the model
    /// assumes zero-mean Gaussian vectors.
    pub fn transform_centered(&self, panel: &ObservationPanel) -> Result<TransformedPanel> {
        self.transform_impl(panel, false)
    }
}

/// Free-function form of [`CopulaModel::transform`].
pub fn copula_transform(model: &CopulaModel, panel: &ObservationPanel) -> Result<TransformedPanel> {
    model.transform(panel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn one_var_panel(samples: &[f64]) -> ObservationPanel {
        let col = Array2::from_shape_vec((samples.len(), 1), samples.to_vec()).unwrap();
        ObservationPanel::new(vec![0.0], vec!["x".into()], vec![col]).unwrap()
    }

    #[test]
    fn pooled_moments() {
        let model = fit_copula(&one_var_panel(&[1.0, 2.0, 3.0])).unwrap();
        let v = model.variable(0);
        assert_abs_diff_eq!(v.mean, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.sd, (2.0f64 / 3.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn delta_values() {
        // 40-digit evaluations of 1 / (4 n^(1/4) sqrt(pi ln n))
        assert_abs_diff_eq!(delta_n(3), 0.102_249_815_340_680_9, epsilon = 1e-15);
        assert_abs_diff_eq!(delta_n(16), 0.042_353_796_975_194_06, epsilon = 1e-15);
    }

    #[test]
    fn delta_uses_pooled_count_across_timestamps() {
        let counts = vec![
            array![[1.0], [2.0], [3.0], [4.0]],
            array![[5.0], [6.0], [7.0], [8.0]],
            array![[1.0], [2.0], [3.0], [4.0]],
            array![[5.0], [6.0], [7.0], [8.0]],
        ];
        let panel =
            ObservationPanel::new(vec![1.0, 2.0, 3.0, 4.0], vec!["x".into()], counts).unwrap();
        let model = fit_copula(&panel).unwrap();
        assert_eq!(model.total_samples(), 16);
        assert_abs_diff_eq!(model.delta(), 0.042_353_796_975_194_06, epsilon = 1e-15);
    }

    #[test]
    fn winsorized_cdf_cases() {
        let model = fit_copula(&one_var_panel(&[1.0, 2.0, 3.0])).unwrap();
        let d3 = 0.102_249_815_340_680_9;
        assert_abs_diff_eq!(model.winsorized_cdf(0, 2.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(model.winsorized_cdf(0, 3.0), 1.0 - d3, epsilon = 1e-15);
        assert_abs_diff_eq!(model.winsorized_cdf(0, 0.0), d3, epsilon = 1e-15);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn transform_oracle_values() {
        let model = fit_copula(&one_var_panel(&[1.0, 2.0, 3.0])).unwrap();
        // 2 + sqrt(2/3) * PhiInv(2/3), 40-digit evaluation
        assert_abs_diff_eq!(
            model.transform_value(0, 2.0),
            2.351_687_367_186_974_4,
            epsilon = 1e-9
        );
        // clamped branches: 2 +- sqrt(2/3) * PhiInv(1 - delta_3)
        assert_abs_diff_eq!(
            model.transform_value(0, 3.0),
            3.036_000_099_499_827,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            model.transform_value(0, 0.0),
            0.963_999_900_500_173,
            epsilon = 1e-9
        );
    }

    #[test]
    fn transform_hits_mean_exactly_at_median() {
        let model = fit_copula(&one_var_panel(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        // F(2) = 0.5, PhiInv(0.5) = 0
        assert_eq!(model.transform_value(0, 2.0), 2.5);
    }

    #[test]
    fn constant_variable_is_rejected() {
        let counts = vec![array![[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]];
        let panel =
            ObservationPanel::new(vec![0.0], vec!["const".into(), "ok".into()], counts).unwrap();
        let model = fit_copula(&panel).unwrap();
        assert_eq!(model.rejected(), &[0]);
        assert_eq!(model.retained(), vec![1]);
        assert_eq!(model.variable(0).sd, 0.0);
    }

    #[test]
    fn insufficient_data_errors() {
        let panel = one_var_panel(&[1.0]);
        assert!(matches!(
            fit_copula(&panel),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn transform_rejects_mismatched_panel() {
        let model = fit_copula(&one_var_panel(&[1.0, 2.0])).unwrap();
        let other =
            ObservationPanel::new(vec![0.0], vec!["y".into()], vec![array![[1.0], [2.0]]]).unwrap();
        assert!(matches!(
            model.transform(&other),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn centered_transform_drops_location() {
        let panel = one_var_panel(&[1.0, 2.0, 3.0]);
        let model = fit_copula(&panel).unwrap();
        let with_mean = model.transform(&panel).unwrap();
        let centered = model.transform_centered(&panel).unwrap();
        for (a, b) in with_mean.values[0].iter().zip(centered.values[0].iter()) {
            assert_abs_diff_eq!(a - 2.0, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn transform_gaussianizes_monotone_functions_of_normals() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        use rand_distr::StandardNormal;
        // any continuous monotone transform of a normal maps back to the same
        // winsorized quantile stencil, so the moments below are deterministic
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 10_000;
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z.exp()
            })
            .collect();
        let col = Array2::from_shape_vec((n, 1), values).unwrap();
        let panel = ObservationPanel::new(vec![0.0], vec!["x".into()], vec![col]).unwrap();
        let model = fit_copula(&panel).unwrap();
        let out = model.transform(&panel).unwrap();
        let xs: Vec<f64> = out.values[0].iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let moment = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n as f64;
        let m2 = moment(2);
        let skewness = moment(3) / m2.powf(1.5);
        let excess_kurtosis = moment(4) / (m2 * m2) - 3.0;
        assert!(skewness.abs() <= 0.1, "skewness {skewness}");
        assert!(
            excess_kurtosis.abs() <= 0.2,
            "excess kurtosis {excess_kurtosis}"
        );
    }

    proptest! {
        #[test]
        fn transform_is_finite_monotone_and_rank_preserving(
            samples in proptest::collection::vec(0u32..50, 2..40),
            probes in proptest::collection::vec(0u32..80, 1..20),
        ) {
            let values: Vec<f64> = samples.iter().map(|v| *v as f64).collect();
            let model = fit_copula(&one_var_panel(&values)).unwrap();
            let mut probes: Vec<f64> = probes.iter().map(|v| *v as f64).collect();
            probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = f64::NEG_INFINITY;
            let mut prev_x = f64::NEG_INFINITY;
            for &x in &probes {
                let f = model.winsorized_cdf(0, x);
                prop_assert!(f >= model.delta() && f <= 1.0 - model.delta());
                let y = model.transform_value(0, x);
                prop_assert!(y.is_finite());
                prop_assert!(y >= prev);
                if model.rejected().is_empty() && x > prev_x && model.winsorized_cdf(0, prev_x) < model.winsorized_cdf(0, x) {
                    prop_assert!(y > prev, "distinct ranks must stay distinct");
                }
                prev = y;
                prev_x = x;
            }
        }
    }
}
