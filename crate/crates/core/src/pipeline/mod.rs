//! The end-to-end workflow: cluster the training rows by feature mix,
//! append cluster dummies to the log-scale design, tune the penalty by
//! cross-validation, refit, and forecast the held-out periods.

mod bundle;
mod cv;
mod dummies;
mod forecast;
mod split;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use bundle::{ModelBundle, Prediction};
pub use cv::{block_folds, cross_validate, period_folds, CvCell, CvResult, FoldShape};
pub use dummies::{augment_with_dummies, dummy_row, Augmented, DummyColumn, OutlierPolicy};
pub use forecast::{error_summary, forecast_report, relative_error, ForecastReport, ForecastRow};
pub use split::{chronological_split, SplitSpec};

use crate::clustering::{
    best_scan_row, core_points, dbscan, k_distance_profile, scan_params, ClusterModel, DbscanParams, ScanRow,
};
use crate::data_model::{entity_feature_max, log_transform, NormalizeMode, PanelDataset, TransformSpec};
use crate::error::{DprError, Result};
use crate::penalized::{self, log_grid, metrics, CdOptions, FittedModel, PenaltyKind, PenaltySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub eps: f64,
    pub min_pts: usize,
    pub core_strict: bool,
    /// When both grids are non-empty, eps and min_pts are chosen by the
    /// largest silhouette over the grid instead.
    pub eps_grid: Vec<f64>,
    pub min_pts_grid: Vec<usize>,
    /// Also cluster every row, test periods included, for interpretation.
    pub refit_full: bool,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            eps: 0.1,
            min_pts: 4,
            core_strict: false,
            eps_grid: Vec::new(),
            min_pts_grid: Vec::new(),
            refit_full: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionConfig {
    pub kind: PenaltyKind,
    /// Explicit lambda grid; empty means a log grid below the smallest
    /// lambda that zeroes every lasso coefficient.
    pub lambda_grid: Vec<f64>,
    pub lambda_count: usize,
    pub lambda_ratio: f64,
    pub alpha_grid: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub outlier_policy: OutlierPolicy,
    pub baseline_cluster: usize,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        let cd = CdOptions::default();
        RegressionConfig {
            kind: PenaltyKind::ElasticNet,
            lambda_grid: Vec::new(),
            lambda_count: 30,
            lambda_ratio: 1e-4,
            alpha_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.0],
            tol: cd.tol,
            max_iter: cd.max_iter,
            outlier_policy: OutlierPolicy::UniqueDummy,
            baseline_cluster: 0,
        }
    }
}

impl RegressionConfig {
    pub fn cd_options(&self) -> CdOptions {
        CdOptions {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Number of trailing periods forecast; 0 trains on every period.
    pub test_periods: usize,
    pub cv_folds: usize,
    pub fold_shape: FoldShape,
    /// Trailing training periods scored by a separate refit on the
    /// earlier training periods; 0 disables it.
    pub holdout_periods: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_periods: 5,
            cv_folds: 5,
            fold_shape: FoldShape::Rows,
            holdout_periods: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DprConfig {
    pub transform: TransformSpec,
    pub clustering: ClusteringConfig,
    pub regression: RegressionConfig,
    pub split: SplitConfig,
}

impl DprConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DprConfig = toml::from_str(text).map_err(|e| DprError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DprError::Config(m));
        let t = &self.transform;
        if !(t.log_offset >= 0.0) || !t.log_offset.is_finite() {
            return bad(format!("transform.log_offset must be finite and >= 0, got {}", t.log_offset));
        }
        let c = &self.clustering;
        DbscanParams {
            eps: c.eps,
            min_pts: c.min_pts,
            core_strict: c.core_strict,
        }
        .validate()
        .or_else(|e| bad(format!("clustering: {e}")))?;
        if c.eps_grid.is_empty() != c.min_pts_grid.is_empty() {
            return bad("clustering.eps_grid and clustering.min_pts_grid must be given together".into());
        }
        let r = &self.regression;
        if r.lambda_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
            return bad("regression.lambda_grid values must be finite and >= 0".into());
        }
        if r.lambda_grid.is_empty() && (r.lambda_count == 0 || !(r.lambda_ratio > 0.0 && r.lambda_ratio <= 1.0)) {
            return bad("regression.lambda_count must be >= 1 and lambda_ratio in (0, 1]".into());
        }
        if r.kind == PenaltyKind::ElasticNet && r.alpha_grid.is_empty() {
            return bad("regression.alpha_grid must be non-empty for elastic net".into());
        }
        if r.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("regression.alpha_grid values must lie in [0, 1]".into());
        }
        if !(r.tol > 0.0) || r.max_iter == 0 {
            return bad("regression.tol must be > 0 and max_iter >= 1".into());
        }
        if self.split.cv_folds < 2 {
            return bad("split.cv_folds must be >= 2".into());
        }
        Ok(())
    }
}

/// Row identity as `(entity, period)` labels.
pub type RowId = (String, String);

pub fn row_ids(data: &PanelDataset) -> Vec<RowId> {
    data.observations()
        .iter()
        .map(|o| (data.entity_label(o).to_string(), data.period_label(o).to_string()))
        .collect()
}

/// Clustering of the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStage {
    pub mix: nalgebra::DMatrix<f64>,
    /// Rows whose mix normalizer was zero.
    pub zero_mix_rows: Vec<usize>,
    pub model: ClusterModel,
    pub scan: Option<Vec<ScanRow>>,
    pub k_distance: Vec<f64>,
}

pub fn cluster_stage(train: &PanelDataset, config: &DprConfig) -> Result<ClusterStage> {
    let c = &config.clustering;
    let mix = crate::data_model::energy_mix_features(train, config.transform.normalize_mode);
    let (params, scan) = if c.eps_grid.is_empty() {
        (
            DbscanParams {
                eps: c.eps,
                min_pts: c.min_pts,
                core_strict: c.core_strict,
            },
            None,
        )
    } else {
        let rows = scan_params(&mix.values, &c.eps_grid, &c.min_pts_grid, c.core_strict)?;
        let best = best_scan_row(&rows).ok_or_else(|| {
            DprError::InvalidArgument("no eps/min_pts pair in the scan grid yields a defined silhouette".into())
        })?;
        (
            DbscanParams {
                eps: best.eps,
                min_pts: best.min_pts,
                core_strict: c.core_strict,
            },
            Some(rows),
        )
    };
    let model = dbscan(&mix.values, &params)?;
    let k = params.min_pts.min(train.len().saturating_sub(1));
    let k_distance = if k >= 1 { k_distance_profile(&mix.values, k)? } else { Vec::new() };
    Ok(ClusterStage {
        mix: mix.values,
        zero_mix_rows: mix.zero_rows,
        model,
        scan,
        k_distance,
    })
}

/// Log-scale design with cluster dummies for the training rows.
pub fn design_stage(train: &PanelDataset, config: &DprConfig, clusters: &ClusterStage) -> Result<Augmented> {
    let logged = log_transform(train, &config.transform)?;
    let y = logged.targets()?;
    let dm = penalized::standardize(&logged.feature_matrix(), &y, logged.feature_names().to_vec())?;
    augment_with_dummies(
        &dm,
        &clusters.model.labels,
        clusters.model.k,
        config.regression.outlier_policy,
        config.regression.baseline_cluster,
    )
}

/// The configured lambda grid in descending order, or the automatic one.
pub fn lambda_grid(design: &penalized::DesignMatrix, config: &RegressionConfig) -> Vec<f64> {
    let mut grid = if config.lambda_grid.is_empty() {
        let top = penalized::lambda_max(design, 1.0);
        let top = if top > 0.0 { top } else { 1.0 };
        log_grid(top, config.lambda_ratio, config.lambda_count)
    } else {
        config.lambda_grid.clone()
    };
    grid.sort_by(|a, b| b.total_cmp(a));
    grid
}

/// Fold of each design row; `rows` maps design rows to dataset rows.
pub fn fold_assignment(train: &PanelDataset, rows: &[usize], config: &SplitConfig) -> Vec<usize> {
    match config.fold_shape {
        FoldShape::Rows => block_folds(rows.len(), config.cv_folds),
        FoldShape::Periods => {
            let periods: Vec<usize> = rows.iter().map(|&i| train.observations()[i].period).collect();
            period_folds(&periods, config.cv_folds)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rows: usize,
    pub mse: f64,
    pub r2: Option<f64>,
    pub sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRow {
    pub entity: String,
    pub period: String,
    pub actual: f64,
    pub fitted: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub alpha: f64,
    pub coefficients: Vec<f64>,
    pub converged: bool,
}

/// Everything derived from the training periods alone.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainArtifacts {
    pub rows: Vec<RowId>,
    pub clusters: ClusterStage,
    pub kept_rows: Vec<usize>,
    pub dropped_rows: Vec<usize>,
    pub dummies: Vec<DummyColumn>,
    pub lambda_grid: Vec<f64>,
    pub cv: CvResult,
    pub model: FittedModel,
    pub path: Vec<PathPoint>,
    pub fitted: Vec<FittedRow>,
    pub train_metrics: Metrics,
    pub validation_metrics: Metrics,
    pub holdout_metrics: Option<Metrics>,
    pub bundle: ModelBundle,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Clustering, tuning and the final fit on the training periods. Nothing
/// here sees a row outside `train`.
pub fn train_stage(train: &PanelDataset, config: &DprConfig) -> Result<TrainArtifacts> {
    stage("config", config.validate())?;
    let clusters = stage("cluster", cluster_stage(train, config))?;
    let aug = stage("dummies", design_stage(train, config, &clusters))?;
    let design = &aug.design;
    let reg = &config.regression;
    let opts = reg.cd_options();
    let grid = lambda_grid(design, reg);
    let folds = fold_assignment(train, &aug.kept_rows, &config.split);
    let cv = stage(
        "cross_validate",
        cross_validate(design, &folds, reg.kind, &grid, &reg.alpha_grid, &opts),
    )?;
    let penalty = cv.best_penalty();
    let fit = finish_fit(train, config, &clusters, &aug, penalty)?;
    let path = stage(
        "path",
        penalized::regularization_path(design, &grid, reg.kind, penalty.mixing(), &opts),
    )?
    .into_iter()
    .map(|m| PathPoint {
        lambda: m.penalty.lambda,
        alpha: m.penalty.mixing(),
        coefficients: m.coefficients,
        converged: m.diagnostics.converged,
    })
    .collect();
    let validation_metrics = Metrics {
        rows: design.nrows(),
        mse: cv.validation_mse,
        r2: cv.validation_r2,
        sparsity: fit.model.diagnostics.sparsity,
    };
    let holdout_metrics = stage("holdout", holdout(train, &aug, &penalty, config))?;
    Ok(TrainArtifacts {
        rows: fit.rows,
        kept_rows: aug.kept_rows,
        dropped_rows: aug.dropped_rows,
        dummies: aug.dummies,
        clusters,
        lambda_grid: grid,
        cv,
        model: fit.model,
        path,
        fitted: fit.fitted,
        train_metrics: fit.train_metrics,
        validation_metrics,
        holdout_metrics,
        bundle: fit.bundle,
    })
}

/// The final fit at a fixed penalty and what is derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct FitArtifacts {
    pub rows: Vec<RowId>,
    pub model: FittedModel,
    pub fitted: Vec<FittedRow>,
    pub train_metrics: Metrics,
    pub bundle: ModelBundle,
}

fn finish_fit(
    train: &PanelDataset,
    config: &DprConfig,
    clusters: &ClusterStage,
    aug: &Augmented,
    penalty: PenaltySpec,
) -> Result<FitArtifacts> {
    let design = &aug.design;
    let model = stage("fit", penalized::fit_strict(design, &penalty, &config.regression.cd_options()))?;
    let ids = row_ids(train);
    let fitted_values = model.predict_standardized(&design.x)?;
    let fitted = aug
        .kept_rows
        .iter()
        .zip(design.y.iter().zip(&fitted_values))
        .map(|(&i, (&y, &f))| FittedRow {
            entity: ids[i].0.clone(),
            period: ids[i].1.clone(),
            actual: y,
            fitted: f,
            residual: y - f,
        })
        .collect();
    let train_metrics = Metrics {
        rows: design.nrows(),
        mse: model.diagnostics.mse,
        r2: model.diagnostics.r2,
        sparsity: model.diagnostics.sparsity,
    };
    let entity_max = match config.transform.normalize_mode {
        NormalizeMode::PerFeatureMax => entity_feature_max(train),
        _ => Default::default(),
    };
    let bundle = ModelBundle {
        feature_names: train.feature_names().to_vec(),
        transform: config.transform,
        eps: clusters.model.params.eps,
        cores: core_points(&clusters.mix, &clusters.model),
        entity_max,
        outlier_policy: config.regression.outlier_policy,
        dummies: aug.dummies.clone(),
        penalty,
        column_names: model.column_names.clone(),
        stats: model.stats.clone(),
        intercept: model.intercept,
        coefficients: model.coefficients.clone(),
    };
    Ok(FitArtifacts {
        rows: ids,
        model,
        fitted,
        train_metrics,
        bundle,
    })
}

/// Clusters the training rows and fits `penalty` directly, without
/// cross-validation.
pub fn fit_stage(train: &PanelDataset, config: &DprConfig, penalty: PenaltySpec) -> Result<FitArtifacts> {
    stage("config", config.validate())?;
    stage("penalty", penalty.validate())?;
    let clusters = stage("cluster", cluster_stage(train, config))?;
    let aug = stage("dummies", design_stage(train, config, &clusters))?;
    finish_fit(train, config, &clusters, &aug, penalty)
}

/// Refits the chosen penalty without the trailing training periods and
/// scores those periods.
fn holdout(train: &PanelDataset, aug: &Augmented, penalty: &PenaltySpec, config: &DprConfig) -> Result<Option<Metrics>> {
    let h = config.split.holdout_periods;
    if h == 0 {
        return Ok(None);
    }
    let periods = train.periods().len();
    if h >= periods {
        return Err(DprError::InvalidArgument(format!(
            "cannot hold out {h} of {periods} training periods"
        )));
    }
    let cut = periods - h;
    let (fit_rows, eval_rows): (Vec<usize>, Vec<usize>) =
        (0..aug.kept_rows.len()).partition(|&r| train.observations()[aug.kept_rows[r]].period < cut);
    let sub = aug.design.select_rows(&fit_rows)?;
    let m = penalized::fit_strict(&sub, penalty, &config.regression.cd_options())?;
    let pred = penalized::predict(&m, &aug.design.raw.select_rows(&eval_rows))?;
    let y: Vec<f64> = eval_rows.iter().map(|&r| aug.design.y[r]).collect();
    Ok(Some(Metrics {
        rows: y.len(),
        mse: metrics::mse(&y, &pred)?,
        r2: metrics::r2(&y, &pred).ok(),
        sparsity: m.sparsity(),
    }))
}

/// Forecast of the test periods.
#[derive(Debug, Clone, PartialEq)]
pub struct TestArtifacts {
    pub rows: Vec<RowId>,
    pub labels: Vec<crate::clustering::Label>,
    /// Test rows with a forecast, aligned to `forecast.rows`.
    pub predicted_rows: Vec<usize>,
    /// Test rows without a prediction (noise under `Exclude`).
    pub dropped_rows: Vec<usize>,
    pub forecast: ForecastReport,
    pub metrics: Option<Metrics>,
}

pub fn test_stage(bundle: &ModelBundle, test: &PanelDataset) -> Result<TestArtifacts> {
    let pred = bundle.predict(test)?;
    let logged = log_transform(test, &bundle.transform)?;
    let ids = row_ids(test);
    let used: HashSet<usize> = pred.rows.iter().copied().collect();
    let dropped_rows = (0..test.len()).filter(|i| !used.contains(i)).collect();
    let sel_ids: Vec<RowId> = pred.rows.iter().map(|&i| ids[i].clone()).collect();
    let actual: Vec<Option<f64>> = pred.rows.iter().map(|&i| logged.observations()[i].target).collect();
    let forecast = forecast_report(&sel_ids, &pred.predicted, &actual, bundle.transform.log_offset)?;
    let pairs: Vec<(f64, f64)> = pred
        .predicted
        .iter()
        .zip(&actual)
        .filter_map(|(&p, a)| a.map(|a| (p, a)))
        .collect();
    let metrics = if pairs.is_empty() {
        None
    } else {
        let (p, a): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Some(Metrics {
            rows: a.len(),
            mse: metrics::mse(&a, &p)?,
            r2: metrics::r2(&a, &p).ok(),
            sparsity: metrics::sparsity(&bundle.coefficients, &bundle.stats.active()),
        })
    };
    Ok(TestArtifacts {
        rows: ids,
        labels: pred.labels,
        predicted_rows: pred.rows,
        dropped_rows,
        forecast,
        metrics,
    })
}

/// A full run: training artifacts, the optional forecast of the test
/// periods and the optional clustering of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: DprConfig,
    pub split: Option<SplitSpec>,
    pub train: TrainArtifacts,
    pub test: Option<TestArtifacts>,
    pub full_clusters: Option<(Vec<RowId>, ClusterModel)>,
    pub notes: Vec<String>,
}

/// Runs the workflow. With `split` absent every period is used for
/// training and no forecast is made.
pub fn run_dpr(data: &PanelDataset, config: &DprConfig, split: Option<&SplitSpec>) -> Result<RunReport> {
    let mut config = config.clone();
    let (train, test) = match split {
        Some(s) => {
            config.split.cv_folds = s.cv_folds;
            let (tr, te) = stage("split", chronological_split(data, s))?;
            (tr, Some(te))
        }
        None => (data.clone(), None),
    };
    let train_art = train_stage(&train, &config)?;
    let mut notes = Vec::new();
    let test_art = match &test {
        Some(te) => {
            notes.push(
                "test rows take the cluster of the nearest training core point within eps, otherwise noise".to_string(),
            );
            Some(stage("forecast", test_stage(&train_art.bundle, te))?)
        }
        None => None,
    };
    if !train_art.dropped_rows.is_empty() {
        notes.push(format!("{} noise rows excluded from the training design", train_art.dropped_rows.len()));
    }
    if !train_art.clusters.zero_mix_rows.is_empty() {
        notes.push(format!(
            "{} training rows have an all-zero feature mix",
            train_art.clusters.zero_mix_rows.len()
        ));
    }
    if train_art.path.iter().any(|p| !p.converged) {
        notes.push("some regularization path fits hit max_iter".to_string());
    }
    let full_clusters = if config.clustering.refit_full {
        let mix = crate::data_model::energy_mix_features(data, config.transform.normalize_mode);
        let m = stage("cluster_full", dbscan(&mix.values, &train_art.clusters.model.params))?;
        Some((row_ids(data), m))
    } else {
        None
    };
    Ok(RunReport {
        config,
        split: split.cloned(),
        train: train_art,
        test: test_art,
        full_clusters,
        notes,
    })
}

/// Split implied by `config.split`: the last `test_periods` periods, or
/// none when that is 0.
pub fn configured_split(data: &PanelDataset, config: &DprConfig) -> Result<Option<SplitSpec>> {
    match config.split.test_periods {
        0 => Ok(None),
        t => SplitSpec::last_periods(data.periods(), t, config.split.cv_folds).map(Some),
    }
}
