//! Solvers for
//!
//! ```text
//! (1/N) * ||y - b0 - X b||^2 + lambda * (alpha * ||b||_1 + (1 - alpha) * ||b||_2^2)
//! ```
//!
//! over standardized columns. Zero-variance columns are skipped and keep a
//! zero coefficient. Because retained columns are centered, the optimal
//! intercept is always `mean(y)`.

use nalgebra::{DMatrix, DVector};

use super::design::DesignMatrix;
use crate::error::{DprError, Result};

/// `sign(z) * max(|z| - gamma, 0)`.
#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Penalized objective at `(intercept, beta)` on the standardized design.
pub fn objective(dm: &DesignMatrix, intercept: f64, beta: &[f64], lambda: f64, alpha: f64) -> f64 {
    let n = dm.nrows();
    let mut rss = 0.0;
    for i in 0..n {
        let mut fit = intercept;
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                fit += dm.x[(i, j)] * b;
            }
        }
        rss += (dm.y[i] - fit).powi(2);
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let l2: f64 = beta.iter().map(|b| b * b).sum();
    rss / n as f64 + lambda * (alpha * l1 + (1.0 - alpha) * l2)
}

/// Pivots below this fraction of the largest diagonal entry of the Gram
/// matrix mark a rank-deficient system.
const RANK_TOL: f64 = 1e-10;

/// Closed-form ridge solution `(X'X/N + lambda I) b = X'(y - ybar)/N`.
pub fn ridge_closed_form(dm: &DesignMatrix, lambda: f64) -> Result<(f64, Vec<f64>)> {
    let active = dm.stats.active();
    let n = dm.nrows() as f64;
    let ybar = dm.mean_y();
    let mut beta = vec![0.0; dm.ncols()];
    if active.is_empty() {
        return Ok((ybar, beta));
    }
    let xa = dm.x.select_columns(&active);
    let yc = DVector::from_iterator(dm.nrows(), dm.y.iter().map(|v| v - ybar));
    let gram: DMatrix<f64> = xa.transpose() * &xa / n;
    let rhs: DVector<f64> = xa.transpose() * yc / n;
    let max_diag = gram.diagonal().max();
    let system = &gram + DMatrix::identity(active.len(), active.len()) * lambda;
    let chol = system.cholesky().ok_or_else(|| {
        DprError::RankDeficient(format!("ridge system is not positive definite at lambda = {lambda}"))
    })?;
    let min_pivot = chol.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
    if min_pivot <= RANK_TOL * max_diag.max(lambda) {
        return Err(DprError::RankDeficient(format!(
            "collinear columns make the normal equations singular at lambda = {lambda}"
        )));
    }
    let solution = chol.solve(&rhs);
    for (k, &j) in active.iter().enumerate() {
        beta[j] = solution[k];
    }
    Ok((ybar, beta))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            tol: 1e-9,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdResult {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub last_change: f64,
}

/// Cyclic coordinate descent in column order, optionally warm-started.
pub fn coordinate_descent(
    dm: &DesignMatrix,
    lambda: f64,
    alpha: f64,
    opts: &CdOptions,
    warm: Option<&[f64]>,
) -> Result<CdResult> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(DprError::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(DprError::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let n = dm.nrows();
    let nf = n as f64;
    let p = dm.ncols();
    let active = dm.stats.active();
    let intercept = dm.mean_y();

    let mut beta = vec![0.0; p];
    if let Some(w) = warm {
        if w.len() != p {
            return Err(DprError::DimensionMismatch { expected: p, got: w.len() });
        }
        for &j in &active {
            beta[j] = w[j];
        }
    }

    // Covariance updates: with G = X'X / N and c = X'(y - mean) / N the
    // partial residual correlation of column j is c_j - (G b)_j + G_jj b_j.
    let data = dm.x.as_slice();
    let cols: Vec<&[f64]> = (0..p).map(|j| &data[j * n..(j + 1) * n]).collect();
    let yc: Vec<f64> = dm.y.iter().map(|v| v - intercept).collect();
    let m = active.len();
    let c: Vec<f64> = active
        .iter()
        .map(|&j| cols[j].iter().zip(&yc).map(|(x, y)| x * y).sum::<f64>() / nf)
        .collect();
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for b in a..m {
            let v = cols[active[a]].iter().zip(cols[active[b]]).map(|(x, y)| x * y).sum::<f64>() / nf;
            gram[a * m + b] = v;
            gram[b * m + a] = v;
        }
    }
    let mut b: Vec<f64> = active.iter().map(|&j| beta[j]).collect();
    let mut gb: Vec<f64> = (0..m)
        .map(|a| (0..m).map(|k| gram[a * m + k] * b[k]).sum())
        .collect();
    let threshold = lambda * alpha / 2.0;
    let ridge = lambda * (1.0 - alpha);
    #[cfg(debug_assertions)]
    let yy = yc.iter().map(|v| v * v).sum::<f64>() / nf;
    #[cfg(debug_assertions)]
    let gram_objective = |b: &[f64], gb: &[f64]| {
        let fit: f64 = (0..m).map(|a| b[a] * (gb[a] - 2.0 * c[a])).sum();
        yy + fit + lambda * (alpha * b.iter().map(|v| v.abs()).sum::<f64>() + (1.0 - alpha) * b.iter().map(|v| v * v).sum::<f64>())
    };

    #[cfg(debug_assertions)]
    let mut last_obj = gram_objective(&b, &gb);

    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut converged = m == 0;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let mut max_change = 0.0f64;
        for a in 0..m {
            let old = b[a];
            let g_aa = gram[a * m + a];
            let rho = c[a] - gb[a] + g_aa * old;
            let new = soft_threshold(rho, threshold) / (g_aa + ridge);
            if new != old {
                let delta = new - old;
                let row = &gram[a * m..(a + 1) * m];
                for (g, r) in gb.iter_mut().zip(row) {
                    *g += r * delta;
                }
                b[a] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        last_change = max_change;
        #[cfg(debug_assertions)]
        {
            let obj = gram_objective(&b, &gb);
            debug_assert!(
                obj <= last_obj + 1e-10 * last_obj.abs().max(1.0),
                "objective increased from {last_obj} to {obj}"
            );
            last_obj = obj;
        }
        converged = max_change < opts.tol;
    }
    for (a, &j) in active.iter().enumerate() {
        beta[j] = b[a];
    }
    if active.is_empty() {
        last_change = 0.0;
    }
    Ok(CdResult {
        intercept,
        beta,
        iterations,
        converged,
        last_change,
    })
}
