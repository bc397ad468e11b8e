//! Ridge, lasso and elastic-net regression over a standardized design.
//!
//! All three share one objective,
//! `(1/N) * RSS + lambda * (alpha * ||b||_1 + (1 - alpha) * ||b||_2^2)`,
//! with ridge at `alpha = 0` and lasso at `alpha = 1`. Multiply `lambda` by
//! `N` to convert to the un-normalized `RSS + lambda_1 ||b||_1 +
//! lambda_2 ||b||_2^2` form (`lambda_1 = N lambda alpha`,
//! `lambda_2 = N lambda (1 - alpha)`). Conventions that halve the L2 term
//! use `2 * lambda * (1 - alpha)` for the same fit.

mod design;
pub mod metrics;
mod solver;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use design::{standardize, ColumnStats, DesignMatrix};
pub use solver::{coordinate_descent, objective, ridge_closed_form, soft_threshold, CdOptions, CdResult};

use crate::error::{DprError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    Ridge,
    Lasso,
    ElasticNet,
}

impl PenaltyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PenaltyKind::Ridge => "ridge",
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::ElasticNet => "elastic_net",
        }
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = DprError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ridge" => Ok(PenaltyKind::Ridge),
            "lasso" => Ok(PenaltyKind::Lasso),
            "elastic_net" | "elasticnet" | "en" => Ok(PenaltyKind::ElasticNet),
            _ => Err(DprError::InvalidArgument(format!("unknown penalty kind '{s}'"))),
        }
    }
}

/// Penalty kind and strength. `alpha` is only carried by elastic net.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub alpha: Option<f64>,
}

impl PenaltySpec {
    pub fn ridge(lambda: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Ridge,
            lambda,
            alpha: None,
        }
    }

    pub fn lasso(lambda: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::Lasso,
            lambda,
            alpha: None,
        }
    }

    pub fn elastic_net(lambda: f64, alpha: f64) -> Self {
        PenaltySpec {
            kind: PenaltyKind::ElasticNet,
            lambda,
            alpha: Some(alpha),
        }
    }

    /// Builds a spec for `kind`, dropping `alpha` unless it is elastic net.
    pub fn of_kind(kind: PenaltyKind, lambda: f64, alpha: f64) -> Self {
        match kind {
            PenaltyKind::Ridge => Self::ridge(lambda),
            PenaltyKind::Lasso => Self::lasso(lambda),
            PenaltyKind::ElasticNet => Self::elastic_net(lambda, alpha),
        }
    }

    /// L1 share of the penalty.
    pub fn mixing(&self) -> f64 {
        match self.kind {
            PenaltyKind::Ridge => 0.0,
            PenaltyKind::Lasso => 1.0,
            PenaltyKind::ElasticNet => self.alpha.unwrap_or(0.5),
        }
    }

    /// `(lambda_1, lambda_2)` of the un-normalized objective on `n` rows.
    pub fn unnormalized(&self, n: usize) -> (f64, f64) {
        let a = self.mixing();
        let scale = self.lambda * n as f64;
        (scale * a, scale * (1.0 - a))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(DprError::InvalidArgument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        match (self.kind, self.alpha) {
            (PenaltyKind::ElasticNet, Some(a)) if (0.0..=1.0).contains(&a) => Ok(()),
            (PenaltyKind::ElasticNet, Some(a)) => {
                Err(DprError::InvalidArgument(format!("alpha must lie in [0, 1], got {a}")))
            }
            (PenaltyKind::ElasticNet, None) => Err(DprError::InvalidArgument("elastic net needs alpha".into())),
            (_, Some(_)) => Err(DprError::InvalidArgument(format!("{} takes no alpha", self.kind.as_str()))),
            (_, None) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Training R^2; absent when the response is constant.
    pub r2: Option<f64>,
    pub mse: f64,
    pub sparsity: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub column_names: Vec<String>,
    pub stats: ColumnStats,
    /// Intercept on the standardized scale.
    pub intercept: f64,
    /// Coefficients on the standardized scale.
    pub coefficients: Vec<f64>,
    /// Intercept and coefficients for raw (unstandardized) columns.
    pub raw_intercept: f64,
    pub raw_coefficients: Vec<f64>,
    pub penalty: PenaltySpec,
    pub diagnostics: Diagnostics,
}

impl FittedModel {
    fn assemble(dm: &DesignMatrix, penalty: PenaltySpec, intercept: f64, beta: Vec<f64>, iterations: usize, converged: bool) -> Result<Self> {
        let stats = dm.stats.clone();
        let mut raw_coefficients = vec![0.0; beta.len()];
        let mut raw_intercept = intercept;
        for j in stats.active() {
            raw_coefficients[j] = beta[j] / stats.stds[j];
            raw_intercept -= beta[j] * stats.means[j] / stats.stds[j];
        }
        let mut model = FittedModel {
            column_names: dm.column_names.clone(),
            stats,
            intercept,
            coefficients: beta,
            raw_intercept,
            raw_coefficients,
            penalty,
            diagnostics: Diagnostics {
                r2: None,
                mse: 0.0,
                sparsity: 0.0,
                iterations,
                converged,
            },
        };
        let fitted = model.predict_standardized(&dm.x)?;
        model.diagnostics.mse = metrics::mse(&dm.y, &fitted)?;
        model.diagnostics.r2 = metrics::r2(&dm.y, &fitted).ok();
        model.diagnostics.sparsity = model.sparsity();
        Ok(model)
    }

    pub fn sparsity(&self) -> f64 {
        metrics::sparsity(&self.coefficients, &self.stats.active())
    }

    pub fn width(&self) -> usize {
        self.coefficients.len()
    }

    /// Predictions for rows already standardized with this model's stats.
    pub fn predict_standardized(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.width() {
            return Err(DprError::DimensionMismatch {
                expected: self.width(),
                got: x.ncols(),
            });
        }
        let active = self.stats.active();
        Ok((0..x.nrows())
            .map(|i| self.intercept + active.iter().map(|&j| self.coefficients[j] * x[(i, j)]).sum::<f64>())
            .collect())
    }
}

fn check_design(dm: &DesignMatrix) -> Result<()> {
    if !dm.standardized {
        return Err(DprError::InvalidArgument("design matrix must be standardized".into()));
    }
    Ok(())
}

pub fn fit_ridge(dm: &DesignMatrix, lambda: f64) -> Result<FittedModel> {
    check_design(dm)?;
    let penalty = PenaltySpec::ridge(lambda);
    penalty.validate()?;
    let (intercept, beta) = ridge_closed_form(dm, lambda)?;
    FittedModel::assemble(dm, penalty, intercept, beta, 0, true)
}

pub fn fit_elastic_net(dm: &DesignMatrix, lambda: f64, alpha: f64, opts: &CdOptions) -> Result<FittedModel> {
    fit_cd(dm, PenaltySpec::elastic_net(lambda, alpha), opts, None)
}

pub fn fit_lasso(dm: &DesignMatrix, lambda: f64, opts: &CdOptions) -> Result<FittedModel> {
    fit_cd(dm, PenaltySpec::lasso(lambda), opts, None)
}

/// Coordinate-descent fit of any penalty kind starting from `warm`.
pub fn fit_warm(dm: &DesignMatrix, penalty: &PenaltySpec, opts: &CdOptions, warm: Option<&[f64]>) -> Result<FittedModel> {
    fit_cd(dm, *penalty, opts, warm)
}

fn fit_cd(dm: &DesignMatrix, penalty: PenaltySpec, opts: &CdOptions, warm: Option<&[f64]>) -> Result<FittedModel> {
    check_design(dm)?;
    penalty.validate()?;
    let r = coordinate_descent(dm, penalty.lambda, penalty.mixing(), opts, warm)?;
    FittedModel::assemble(dm, penalty, r.intercept, r.beta, r.iterations, r.converged)
}

/// Fits `penalty` on `dm`: ridge in closed form, lasso and elastic net by
/// coordinate descent.
pub fn fit(dm: &DesignMatrix, penalty: &PenaltySpec, opts: &CdOptions) -> Result<FittedModel> {
    match penalty.kind {
        PenaltyKind::Ridge => fit_ridge(dm, penalty.lambda),
        _ => fit_cd(dm, *penalty, opts, None),
    }
}

/// Like [`fit`] but turns a non-converged coordinate descent into an error.
pub fn fit_strict(dm: &DesignMatrix, penalty: &PenaltySpec, opts: &CdOptions) -> Result<FittedModel> {
    let m = fit(dm, penalty, opts)?;
    if !m.diagnostics.converged {
        return Err(DprError::NotConverged {
            iterations: m.diagnostics.iterations,
            last_change: f64::NAN,
        });
    }
    Ok(m)
}

/// Warm-started fits over a strictly descending lambda grid. Every model
/// on the path is fitted by coordinate descent; `kind` only labels the
/// penalty, with `alpha` fixed by it for ridge and lasso.
pub fn regularization_path(
    dm: &DesignMatrix,
    lambdas: &[f64],
    kind: PenaltyKind,
    alpha: f64,
    opts: &CdOptions,
) -> Result<Vec<FittedModel>> {
    if lambdas.is_empty() {
        return Err(DprError::InvalidArgument("lambda grid is empty".into()));
    }
    if lambdas.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(DprError::InvalidArgument("lambda grid must be strictly descending".into()));
    }
    let mut out: Vec<FittedModel> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let penalty = PenaltySpec::of_kind(kind, lambda, alpha);
        let warm = out.last().map(|m| m.coefficients.clone());
        out.push(fit_cd(dm, penalty, opts, warm.as_deref())?);
    }
    Ok(out)
}

/// Predicts from rows in raw design space, standardizing with the model's
/// stored statistics.
pub fn predict(model: &FittedModel, rows: &DMatrix<f64>) -> Result<Vec<f64>> {
    let x = model.stats.apply(rows)?;
    model.predict_standardized(&x)
}

/// `n` log-spaced values from `max` down to `max * ratio`.
pub fn log_grid(max: f64, ratio: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![max];
    }
    (0..n)
        .map(|i| max * ratio.powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Smallest lambda at which every coefficient is zero for mixing `alpha > 0`:
/// `max_j |x_j' (y - ybar)| * 2 / (N alpha)`.
pub fn lambda_max(dm: &DesignMatrix, alpha: f64) -> f64 {
    let n = dm.nrows() as f64;
    let ybar = dm.mean_y();
    let a = alpha.max(1e-3);
    dm.stats
        .active()
        .iter()
        .map(|&j| {
            (0..dm.nrows()).map(|i| dm.x[(i, j)] * (dm.y[i] - ybar)).sum::<f64>().abs() * 2.0 / (n * a)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> DesignMatrix {
        let raw = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        standardize(&raw, &[2.0, 4.0, 6.0, 8.0], vec!["x".into()]).unwrap()
    }

    #[test]
    fn ols_through_ridge_at_zero() {
        let m = fit_ridge(&line(), 0.0).unwrap();
        assert!((m.raw_coefficients[0] - 2.0).abs() < 1e-12);
        assert!(m.raw_intercept.abs() < 1e-12);
        assert!((m.diagnostics.r2.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.diagnostics.sparsity, 1.0);
    }

    #[test]
    fn huge_lambda_shrinks_everything() {
        let dm = line();
        let r = fit_ridge(&dm, 1e9).unwrap();
        assert!(r.coefficients[0].abs() < 1e-8);
        assert!((r.intercept - 5.0).abs() < 1e-12);
        let e = fit_elastic_net(&dm, 1e9, 0.5, &CdOptions::default()).unwrap();
        assert_eq!(e.coefficients, vec![0.0]);
        assert_eq!(e.diagnostics.sparsity, 0.0);
        let path = regularization_path(&dm, &[1e9], PenaltyKind::Lasso, 1.0, &CdOptions::default()).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path[0].coefficients, vec![0.0]);
    }

    #[test]
    fn lasso_at_zero_is_ols() {
        let m = fit_lasso(&line(), 0.0, &CdOptions::default()).unwrap();
        assert!((m.raw_coefficients[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn predict_consistency() {
        let dm = line();
        let m = fit_elastic_net(&dm, 0.1, 0.3, &CdOptions::default()).unwrap();
        let fitted = predict(&m, &dm.raw).unwrap();
        let std = m.predict_standardized(&dm.x).unwrap();
        for (a, b) in fitted.iter().zip(&std) {
            assert!((a - b).abs() < 1e-12);
        }
        let mean_row = DMatrix::from_row_slice(1, 1, &[2.5]);
        assert!((predict(&m, &mean_row).unwrap()[0] - m.intercept).abs() < 1e-12);
        assert!(predict(&m, &DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn penalty_validation() {
        assert!(PenaltySpec::elastic_net(0.1, 1.2).validate().is_err());
        assert!(PenaltySpec::ridge(-1.0).validate().is_err());
        let bad = PenaltySpec {
            kind: PenaltyKind::Lasso,
            lambda: 0.1,
            alpha: Some(0.5),
        };
        assert!(bad.validate().is_err());
        assert_eq!(PenaltySpec::elastic_net(0.5, 0.3).unnormalized(10), (1.5, 3.5));
    }

    #[test]
    fn path_requires_descending_grid() {
        let dm = line();
        let opts = CdOptions::default();
        assert!(regularization_path(&dm, &[0.1, 0.2], PenaltyKind::Lasso, 1.0, &opts).is_err());
        assert!(regularization_path(&dm, &[0.1, 0.1], PenaltyKind::Lasso, 1.0, &opts).is_err());
        assert!(regularization_path(&dm, &[], PenaltyKind::Lasso, 1.0, &opts).is_err());
    }

    #[test]
    fn lambda_max_zeroes_lasso() {
        let dm = line();
        let lm = lambda_max(&dm, 1.0);
        let m = fit_lasso(&dm, lm * 1.0001, &CdOptions::default()).unwrap();
        assert_eq!(m.coefficients, vec![0.0]);
        let m = fit_lasso(&dm, lm * 0.99, &CdOptions::default()).unwrap();
        assert!(m.coefficients[0] != 0.0);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 1e-3, 4);
        assert_eq!(g[0], 1.0);
        assert!((g[3] - 1e-3).abs() < 1e-15);
    }
}
