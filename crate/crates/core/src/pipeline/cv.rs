//! K-fold cross-validation over a (lambda, alpha) grid.
//!
//! Folds are fixed index sets supplied by the caller (see
//! [`block_folds`] and [`period_folds`]). Each fold's training part is
//! re-standardized from raw values, so validation rows never influence the
//! scaling they are evaluated with.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DprError, Result};
use crate::penalized::{self, metrics, CdOptions, DesignMatrix, PenaltyKind, PenaltySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FoldShape {
    /// Contiguous blocks of rows in dataset order (entities stay grouped).
    #[default]
    Rows,
    /// Contiguous blocks of periods.
    Periods,
}

impl std::str::FromStr for FoldShape {
    type Err = DprError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rows" => Ok(FoldShape::Rows),
            "periods" => Ok(FoldShape::Periods),
            _ => Err(DprError::InvalidArgument(format!("unknown fold shape '{s}'"))),
        }
    }
}

/// Assigns `n` rows to `folds` contiguous blocks of near-equal size.
pub fn block_folds(n: usize, folds: usize) -> Vec<usize> {
    (0..n).map(|i| i * folds / n).collect()
}

/// Assigns rows to folds by contiguous blocks of their period index.
pub fn period_folds(periods: &[usize], folds: usize) -> Vec<usize> {
    let mut distinct: Vec<usize> = periods.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let m = distinct.len();
    periods
        .iter()
        .map(|p| {
            let rank = distinct.binary_search(p).unwrap();
            rank * folds / m
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub lambda: f64,
    pub alpha: f64,
    pub mean_mse: f64,
    pub mean_r2: f64,
    pub fold_mse: Vec<f64>,
    pub converged: bool,
    /// Set when some fold could not be fitted; such cells never win.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub kind: PenaltyKind,
    pub best_lambda: f64,
    pub best_alpha: f64,
    pub table: Vec<CvCell>,
    /// Out-of-fold predictions of the winning cell, in row order.
    pub oof_predictions: Vec<f64>,
    /// Mean fold MSE of the winning cell.
    pub validation_mse: f64,
    /// `1 - validation_mse / var(y)`, so it orders cells exactly as the
    /// selection criterion does.
    pub validation_r2: Option<f64>,
}

impl CvResult {
    pub fn best_penalty(&self) -> PenaltySpec {
        PenaltySpec::of_kind(self.kind, self.best_lambda, self.best_alpha)
    }
}

struct FoldRun {
    /// Per lambda in caller order: validation predictions or an error.
    preds: Vec<std::result::Result<(Vec<f64>, bool), String>>,
}

fn run_fold(
    dm: &DesignMatrix,
    train_rows: &[usize],
    valid_rows: &[usize],
    kind: PenaltyKind,
    lambdas: &[f64],
    alpha: f64,
    opts: &CdOptions,
) -> Result<FoldRun> {
    let sub = dm.select_rows(train_rows)?;
    let valid_raw = dm.raw.select_rows(valid_rows);
    // Descending order lets coordinate descent warm-start along the grid.
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]).then(a.cmp(&b)));
    let mut preds = vec![Err(String::new()); lambdas.len()];
    let mut warm: Option<Vec<f64>> = None;
    let mut prev: Option<usize> = None;
    for idx in order {
        if let Some(p) = prev.filter(|&p| lambdas[p] == lambdas[idx]) {
            preds[idx] = preds[p].clone();
            continue;
        }
        prev = Some(idx);
        let penalty = PenaltySpec::of_kind(kind, lambdas[idx], alpha);
        let fitted = match kind {
            PenaltyKind::Ridge => penalized::fit_ridge(&sub, lambdas[idx]),
            _ => penalized::fit_warm(&sub, &penalty, opts, warm.as_deref()).inspect(|m| {
                warm = Some(m.coefficients.clone());
            }),
        };
        preds[idx] = fitted
            .and_then(|m| Ok((penalized::predict(&m, &valid_raw)?, m.diagnostics.converged)))
            .map_err(|e| e.to_string());
    }
    Ok(FoldRun { preds })
}

fn cv_r2(y: &[f64], mse: f64) -> Option<f64> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (var > 0.0).then(|| 1.0 - mse / var)
}

/// Grid search by k-fold cross-validation. `folds[i]` is the fold of row
/// `i`. The winner minimizes mean validation MSE; exact ties go to the
/// larger lambda, then the larger alpha.
pub fn cross_validate(
    dm: &DesignMatrix,
    folds: &[usize],
    kind: PenaltyKind,
    lambda_grid: &[f64],
    alpha_grid: &[f64],
    opts: &CdOptions,
) -> Result<CvResult> {
    let n = dm.nrows();
    if folds.len() != n {
        return Err(DprError::DimensionMismatch { expected: n, got: folds.len() });
    }
    if lambda_grid.is_empty() || alpha_grid.is_empty() {
        return Err(DprError::InvalidArgument("lambda and alpha grids must be non-empty".into()));
    }
    let k = folds.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(DprError::InvalidArgument("cross-validation needs at least 2 folds".into()));
    }
    let members: Vec<Vec<usize>> = (0..k).map(|f| (0..n).filter(|&i| folds[i] == f).collect()).collect();
    for (f, m) in members.iter().enumerate() {
        if m.len() < 2 || n - m.len() < 2 {
            return Err(DprError::InvalidArgument(format!("fold {f} has {} rows; every fold needs at least 2", m.len())));
        }
    }
    let alphas: Vec<f64> = match kind {
        PenaltyKind::Ridge => vec![0.0],
        PenaltyKind::Lasso => vec![1.0],
        PenaltyKind::ElasticNet => alpha_grid.to_vec(),
    };
    for &a in &alphas {
        if !(0.0..=1.0).contains(&a) {
            return Err(DprError::InvalidArgument(format!("alpha {a} outside [0, 1]")));
        }
    }

    let jobs: Vec<(usize, usize)> = (0..alphas.len()).flat_map(|a| (0..k).map(move |f| (a, f))).collect();
    let runs: Vec<FoldRun> = jobs
        .par_iter()
        .map(|&(a, f)| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            run_fold(dm, &train, &members[f], kind, lambda_grid, alphas[a], opts)
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::with_capacity(alphas.len() * lambda_grid.len());
    let mut oof_by_cell: Vec<Option<Vec<f64>>> = Vec::new();
    for (a, &alpha) in alphas.iter().enumerate() {
        for (l, &lambda) in lambda_grid.iter().enumerate() {
            let mut fold_mse = Vec::with_capacity(k);
            let mut fold_r2 = Vec::with_capacity(k);
            let mut oof = vec![0.0; n];
            let mut error = None;
            let mut converged = true;
            for f in 0..k {
                match &runs[a * k + f].preds[l] {
                    Ok((pred, conv)) => {
                        converged &= conv;
                        let y: Vec<f64> = members[f].iter().map(|&i| dm.y[i]).collect();
                        fold_mse.push(metrics::mse(&y, pred)?);
                        fold_r2.push(metrics::r2(&y, pred).unwrap_or(f64::NAN));
                        for (&i, &p) in members[f].iter().zip(pred) {
                            oof[i] = p;
                        }
                    }
                    Err(e) => {
                        error.get_or_insert_with(|| format!("fold {f}: {e}"));
                        fold_mse.push(f64::NAN);
                        fold_r2.push(f64::NAN);
                    }
                }
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            table.push(CvCell {
                lambda,
                alpha,
                mean_mse: if error.is_some() { f64::NAN } else { mean(&fold_mse) },
                mean_r2: if error.is_some() { f64::NAN } else { mean(&fold_r2) },
                fold_mse,
                converged,
                error: error.clone(),
            });
            oof_by_cell.push(if error.is_none() { Some(oof) } else { None });
        }
    }

    let best = table
        .iter()
        .enumerate()
        .filter(|(_, c)| c.error.is_none() && c.mean_mse.is_finite())
        .min_by(|(_, x), (_, y)| {
            x.mean_mse
                .total_cmp(&y.mean_mse)
                .then(y.lambda.total_cmp(&x.lambda))
                .then(y.alpha.total_cmp(&x.alpha))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| {
            let first = table.iter().find_map(|c| c.error.clone()).unwrap_or_default();
            DprError::RankDeficient(format!("no grid cell could be fitted ({first})"))
        })?;
    let oof = oof_by_cell[best].take().unwrap();
    Ok(CvResult {
        kind,
        best_lambda: table[best].lambda,
        best_alpha: table[best].alpha,
        validation_mse: table[best].mean_mse,
        validation_r2: cv_r2(&dm.y, table[best].mean_mse),
        oof_predictions: oof,
        table,
    })
}
