//! L1-penalized Gaussian maximum-likelihood estimation of a precision matrix.
//!
//! Solves  min over PD Theta of  -log det(Theta) + tr(Theta S) + lambda * sum_{i!=j} |Theta_ij|
//! by block coordinate descent over columns, each column a lasso subproblem
//! handled by cyclic coordinate descent. The penalty is applied to
//! off-diagonal entries only, so the unpenalized problem recovers S^-1
//! exactly. Convergence is certified by the primal-dual gap rather than
//! parameter change: the dual is  max log det(W) + m  over W with
//! W_ii = S_ii and |W_ij - S_ij| <= lambda, and a feasible dual point is
//! built from the current iterate by clamping Theta^-1 into that box.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative asymmetry accepted before an input matrix is rejected outright.
/// Inputs inside the band are symmetrized as (S + S^T)/2.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// A validated covariance input: square, symmetric, strictly positive diagonal.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    entries: Array2<f64>,
}

impl CovarianceMatrix {
    /// Validates and symmetrizes a covariance matrix. Entries must be finite,
    /// the asymmetry must stay within `1e-12` relative to the largest entry,
    /// and every diagonal entry must be strictly positive.
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::invalid(format!(
                "covariance must be square and nonempty, got {r}x{c}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("covariance contains non-finite entries"));
        }
        let scale = linalg::max_abs(&entries).max(1.0);
        let asym = linalg::max_asymmetry(&entries);
        if asym > SYMMETRY_TOLERANCE * scale {
            return Err(Error::invalid(format!(
                "covariance asymmetry {asym:.3e} exceeds tolerance {:.3e}",
                SYMMETRY_TOLERANCE * scale
            )));
        }
        for i in 0..r {
            if entries[[i, i]] <= 0.0 {
                return Err(Error::invalid(format!(
                    "covariance diagonal entry {i} is {}, must be > 0",
                    entries[[i, i]]
                )));
            }
        }
        Ok(Self {
            entries: linalg::symmetrized(&entries),
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }
}

/// Stopping rule and support threshold for the solver.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Duality-gap value below which the iterate is accepted.
    pub tolerance: f64,
    /// Maximum number of outer sweeps over all columns.
    pub max_iterations: usize,
    /// Off-diagonal magnitude above which an entry counts as an edge.
    pub support_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 500,
            support_threshold: 1e-6,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !self.tolerance.is_finite() || self.tolerance <= 0.0 {
            return Err(Error::invalid("tolerance must be > 0"));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("maxIterations must be >= 1"));
        }
        if self.support_threshold.is_nan() || self.support_threshold < 0.0 {
            return Err(Error::invalid("supportThreshold must be >= 0"));
        }
        Ok(())
    }
}

/// One estimated precision matrix with its edge support and solver diagnostics.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate {
    pub theta: Array2<f64>,
    pub lambda: f64,
    pub edges: BTreeSet<(usize, usize)>,
    pub objective: f64,
    pub duality_gap: f64,
    pub iterations: usize,
}

impl PrecisionEstimate {
    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }
}

/// All unordered pairs (i, j), i < j, with |theta_ij| strictly above `threshold`.
pub fn support_edges(theta: &Array2<f64>, threshold: f64) -> BTreeSet<(usize, usize)> {
    let m = theta.nrows();
    let mut edges = BTreeSet::new();
    for i in 0..m {
        for j in i + 1..m {
            if theta[[i, j]].abs() > threshold {
                edges.insert((i, j));
            }
        }
    }
    edges
}

/// Primal objective of the penalized problem at `theta` (assumed symmetric).
fn primal_objective(s: &Array2<f64>, theta: &Array2<f64>, lambda: f64, log_det_theta: f64) -> f64 {
    let m = s.nrows();
    let mut trace = 0.0;
    let mut off_l1 = 0.0;
    for i in 0..m {
        for j in 0..m {
            trace += s[[i, j]] * theta[[i, j]];
            if i != j {
                off_l1 += theta[[i, j]].abs();
            }
        }
    }
    -log_det_theta + trace + lambda * off_l1
}

/// Primal-dual gap of `theta` for the penalized problem, plus the primal
/// value. Returns `(inf, inf)` when `theta` is not positive definite and
/// `(inf, primal)` when the constructed dual point is infeasible.
fn gap_and_objective(s: &Array2<f64>, theta: &Array2<f64>, lambda: f64) -> (f64, f64) {
    let m = s.nrows();
    let chol_theta = match linalg::cholesky(theta) {
        Some(l) => l,
        None => return (f64::INFINITY, f64::INFINITY),
    };
    let log_det_theta = linalg::log_det_from_cholesky(&chol_theta);
    let primal = primal_objective(s, theta, lambda, log_det_theta);

    let theta_inv = linalg::inverse_from_cholesky(&chol_theta);
    // dual point: keep the diagonal of S, clamp the off-diagonal of Theta^-1
    // into the lambda-box around S
    let mut dual_point = s.clone();
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let a = (theta_inv[[i, j]] - s[[i, j]]).clamp(-lambda, lambda);
                dual_point[[i, j]] = s[[i, j]] + a;
            }
        }
    }
    let chol_w = match linalg::cholesky(&dual_point) {
        Some(l) => l,
        None => return (f64::INFINITY, primal),
    };
    let dual = linalg::log_det_from_cholesky(&chol_w) + m as f64;
    ((primal - dual).max(0.0), primal)
}

/// Primal-dual gap for a candidate precision matrix. Zero (up to round-off)
/// iff `theta` minimizes the penalized objective for this covariance.
pub fn duality_gap(s: &CovarianceMatrix, theta: &Array2<f64>, lambda: f64) -> Result<f64> {
    if theta.dim() != (s.dim(), s.dim()) {
        return Err(Error::invalid(format!(
            "theta is {:?}, covariance is {}x{}",
            theta.dim(),
            s.dim(),
            s.dim()
        )));
    }
    let theta = linalg::symmetrized(theta);
    if linalg::cholesky(&theta).is_none() {
        return Err(Error::invalid("theta must be positive definite"));
    }
    let (gap, _) = gap_and_objective(s.entries(), &theta, lambda);
    Ok(gap)
}

/// Cyclic coordinate descent for the column lasso
/// min over beta of  0.5 beta' W11 beta - s12' beta + lambda |beta|_1.
/// `q` holds W11 * beta and is kept in sync incrementally.
fn column_lasso(
    w11: &Array2<f64>,
    s12: &Array1<f64>,
    beta: &mut Array1<f64>,
    q: &mut Array1<f64>,
    lambda: f64,
    tol: f64,
    max_cycles: usize,
) {
    let p = beta.len();
    if p == 0 {
        return;
    }
    for _ in 0..max_cycles {
        let mut max_delta = 0.0f64;
        for k in 0..p {
            let old = beta[k];
            let c = s12[k] - (q[k] - w11[[k, k]] * old);
            let new = soft_threshold(c, lambda) / w11[[k, k]];
            if new != old {
                let delta = new - old;
                for l in 0..p {
                    q[l] += w11[[l, k]] * delta;
                }
                beta[k] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta <= tol {
            return;
        }
    }
}

fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Solves the penalized problem for one covariance input.
///
/// Errors: `lambda = 0` with a singular covariance is a singular-input error;
/// running out of sweeps before the duality gap reaches `opts.tolerance`
/// yields a non-convergence error carrying the last iterate and gap.
pub fn graphical_lasso(
    s: &CovarianceMatrix,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<PrecisionEstimate> {
    opts.validate()?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::invalid("lambda must be a finite nonnegative real"));
    }
    let m = s.dim();
    let sm = s.entries();
    if lambda == 0.0 && linalg::cholesky(sm).is_none() {
        return Err(Error::SingularInput(
            "lambda = 0 requires a positive-definite covariance".into(),
        ));
    }

    let mut w = sm.clone();
    let mut coefs = Array2::<f64>::zeros((m, m)); // column j: lasso coefficients, row index skips j
    let mut theta = Array2::<f64>::zeros((m, m));

    // Inner stop on the largest coordinate move. The outer duality gap is the
    // real gate; this only has to be tight enough not to stall it.
    let inner_tol = (opts.tolerance / (10.0 * m as f64)).max(1e-15);
    let inner_cycles = 200 * m.max(4);

    let mut w11 = Array2::<f64>::zeros((m.saturating_sub(1), m.saturating_sub(1)));
    let mut s12 = Array1::<f64>::zeros(m.saturating_sub(1));
    let mut beta = Array1::<f64>::zeros(m.saturating_sub(1));
    let mut q = Array1::<f64>::zeros(m.saturating_sub(1));

    for sweep in 1..=opts.max_iterations {
        for j in 0..m {
            // partition out row/column j
            let mut r = 0;
            for i in 0..m {
                if i == j {
                    continue;
                }
                s12[r] = sm[[i, j]];
                beta[r] = coefs[[i, j]];
                let mut cidx = 0;
                for k in 0..m {
                    if k == j {
                        continue;
                    }
                    w11[[r, cidx]] = w[[i, k]];
                    cidx += 1;
                }
                r += 1;
            }
            // q = W11 * beta (fresh; W11 changed since this column's last visit)
            for k in 0..m - 1 {
                let mut acc = 0.0;
                for l in 0..m - 1 {
                    acc += w11[[k, l]] * beta[l];
                }
                q[k] = acc;
            }
            if m > 1 {
                column_lasso(
                    &w11,
                    &s12,
                    &mut beta,
                    &mut q,
                    lambda,
                    inner_tol,
                    inner_cycles,
                );
            }
            // write w12 = W11 beta back (diagonal of W never changes), recover
            // this column of Theta from the block-inverse identities
            let mut dot_qb = 0.0;
            let mut r = 0;
            for i in 0..m {
                if i == j {
                    continue;
                }
                w[[i, j]] = q[r];
                w[[j, i]] = q[r];
                coefs[[i, j]] = beta[r];
                dot_qb += q[r] * beta[r];
                r += 1;
            }
            let theta_jj = 1.0 / (w[[j, j]] - dot_qb);
            theta[[j, j]] = theta_jj;
            let mut r = 0;
            for i in 0..m {
                if i == j {
                    continue;
                }
                theta[[i, j]] = -beta[r] * theta_jj;
                theta[[j, i]] = theta[[i, j]];
                r += 1;
            }
        }

        let theta_sym = linalg::symmetrized(&theta);
        let (gap, objective) = gap_and_objective(sm, &theta_sym, lambda);
        let estimate = PrecisionEstimate {
            edges: support_edges(&theta_sym, opts.support_threshold),
            theta: theta_sym,
            lambda,
            objective,
            duality_gap: gap,
            iterations: sweep,
        };
        if gap <= opts.tolerance {
            return Ok(estimate);
        }
        if sweep == opts.max_iterations {
            return Err(Error::NonConvergence {
                estimate: Box::new(estimate),
                gap,
                iterations: sweep,
            });
        }
    }
    unreachable!("loop returns on convergence or exhaustion");
}
