//! Small dense symmetric linear algebra: Cholesky factorization and the
//! handful of derived quantities the estimators need (inverse, log-determinant,
//! triangular solves). Matrices here are query-relevant entity sets, so
//! dimensions stay small and a plain O(m^3) factorization is the right tool.

use ndarray::Array2;

/// Lower-triangular Cholesky factor of a symmetric matrix, or `None` if the
/// matrix is not positive definite (a pivot fails to stay strictly positive).
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let m = a.nrows();
    debug_assert_eq!(m, a.ncols());
    let mut l = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= 0.0 || !sum.is_finite() {
                    return None;
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// log det A from its Cholesky factor.
pub fn log_det_from_cholesky(l: &Array2<f64>) -> f64 {
    (0..l.nrows()).map(|i| l[[i, i]].ln()).sum::<f64>() * 2.0
}

/// Solve L y = b in place (forward substitution, L lower triangular).
pub fn solve_lower(l: &Array2<f64>, b: &mut [f64]) {
    let m = l.nrows();
    for i in 0..m {
        let mut v = b[i];
        for k in 0..i {
            v -= l[[i, k]] * b[k];
        }
        b[i] = v / l[[i, i]];
    }
}

/// Solve L^T x = b in place (back substitution against the transpose of L).
pub fn solve_lower_transpose(l: &Array2<f64>, b: &mut [f64]) {
    let m = l.nrows();
    for i in (0..m).rev() {
        let mut v = b[i];
        for k in i + 1..m {
            v -= l[[k, i]] * b[k];
        }
        b[i] = v / l[[i, i]];
    }
}

/// Inverse of A = L L^T, computed column by column from the factor.
pub fn inverse_from_cholesky(l: &Array2<f64>) -> Array2<f64> {
    let m = l.nrows();
    let mut inv = Array2::<f64>::zeros((m, m));
    let mut col = vec![0.0; m];
    for j in 0..m {
        col.iter_mut().for_each(|v| *v = 0.0);
        col[j] = 1.0;
        solve_lower(l, &mut col);
        solve_lower_transpose(l, &mut col);
        for i in 0..m {
            inv[[i, j]] = col[i];
        }
    }
    // exact symmetry regardless of round-off in the two triangular solves
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            inv[[i, j]] = v;
            inv[[j, i]] = v;
        }
    }
    inv
}

/// (A + A^T) / 2.
pub fn symmetrized(a: &Array2<f64>) -> Array2<f64> {
    let m = a.nrows();
    let mut out = a.clone();
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            out[[i, j]] = v;
            out[[j, i]] = v;
        }
    }
    out
}

/// Largest |a_ij - a_ji| over all pairs.
pub fn max_asymmetry(a: &Array2<f64>) -> f64 {
    let m = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in 0..i {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

/// Largest absolute entry.
pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
