//! Run directory layout. Every file is a delimited table with a header row
//! except `summary.json` and the `model.txt` bundle; numbers are written
//! with 17 significant digits.
//!
//! | file | columns |
//! |---|---|
//! | `clusters.csv` | entity, period, cluster (id or `noise`), core (0/1) |
//! | `test_clusters.csv` | entity, period, cluster |
//! | `full_clusters.csv` | entity, period, cluster, core |
//! | `scan.csv` | eps, min_pts, k, noise, sc, sse |
//! | `k_distance.csv` | rank, distance |
//! | `cv_table.csv` | lambda, alpha, mean_mse, mean_r2, converged, error, mse_fold_0.. |
//! | `coefficients.csv` | column, mean, std, zero_variance, coefficient, raw_coefficient |
//! | `fitted.csv` | entity, period, actual, fitted, residual |
//! | `path_trajectories.csv` | lambda, one column per design column |
//! | `fit_scatter.csv` | entity, period, split, actual, predicted |
//! | `forecast.csv` | entity, period, cluster, predicted_log, actual_log, predicted, actual, relative_error |
//!
//! `fitted.csv` and `forecast.csv` values of `actual`/`fitted` are on the
//! log scale unless named otherwise. Empty cells mean "not available".

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::clustering::{ClusterModel, Label, ScanRow};
use crate::error::{DprError, Result};
use crate::fmt::num17;
use crate::penalized::FittedModel;
use crate::pipeline::{CvResult, FittedRow, ForecastReport, Metrics, PathPoint, RowId, RunReport, TestArtifacts, TrainArtifacts};

/// Files whose content depends only on the training periods.
pub const TRAINING_FILES: &[&str] = &[
    "clusters.csv",
    "k_distance.csv",
    "cv_table.csv",
    "coefficients.csv",
    "fitted.csv",
    "path_trajectories.csv",
    "model.txt",
];

/// Builds a directory's content in a sibling temporary directory and moves
/// it into place only once every file has been written.
pub fn write_dir_atomic<F>(out: &Path, build: F) -> Result<()>
where
    F: FnOnce(&Path) -> Result<()>,
{
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = out
        .file_name()
        .ok_or_else(|| DprError::InvalidArgument(format!("invalid output directory '{}'", out.display())))?
        .to_string_lossy()
        .into_owned();
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    if let Err(e) = build(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if out.exists() {
        let old = parent.join(format!(".{name}.old-{}", std::process::id()));
        fs::rename(out, &old)?;
        fs::rename(&tmp, out)?;
        fs::remove_dir_all(&old)?;
    } else {
        fs::rename(&tmp, out)?;
    }
    Ok(())
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| DprError::InvalidArgument(format!("invalid output file '{}'", path.display())))?
        .to_string_lossy()
        .into_owned();
    let tmp = path.with_file_name(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn strs(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(num17).unwrap_or_default()
}

pub fn label_str(l: Label) -> String {
    l.map_or("noise".to_string(), |c| c.to_string())
}

pub fn write_clusters(path: &Path, ids: &[RowId], model: &ClusterModel) -> Result<()> {
    let rows: Vec<Vec<String>> = ids
        .iter()
        .enumerate()
        .map(|(i, (e, p))| {
            vec![e.clone(), p.clone(), label_str(model.labels[i]), u8::from(model.core[i]).to_string()]
        })
        .collect();
    table(path, &strs(&["entity", "period", "cluster", "core"]), &rows)
}

pub fn write_assignments(path: &Path, ids: &[RowId], labels: &[Label]) -> Result<()> {
    let rows: Vec<Vec<String>> = ids
        .iter()
        .zip(labels)
        .map(|((e, p), l)| vec![e.clone(), p.clone(), label_str(*l)])
        .collect();
    table(path, &strs(&["entity", "period", "cluster"]), &rows)
}

pub fn write_scan(path: &Path, scan: &[ScanRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = scan
        .iter()
        .map(|r| {
            vec![num17(r.eps), r.min_pts.to_string(), r.k.to_string(), r.noise.to_string(), opt(r.sc), num17(r.sse)]
        })
        .collect();
    table(path, &strs(&["eps", "min_pts", "k", "noise", "sc", "sse"]), &rows)
}

pub fn write_k_distance(path: &Path, profile: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = profile
        .iter()
        .enumerate()
        .map(|(i, &d)| vec![(i + 1).to_string(), num17(d)])
        .collect();
    table(path, &strs(&["rank", "distance"]), &rows)
}

pub fn write_cv_table(path: &Path, cv: &CvResult) -> Result<()> {
    let folds = cv.table.first().map_or(0, |c| c.fold_mse.len());
    let mut header = strs(&["lambda", "alpha", "mean_mse", "mean_r2", "converged", "error"]);
    header.extend((0..folds).map(|f| format!("mse_fold_{f}")));
    let rows: Vec<Vec<String>> = cv
        .table
        .iter()
        .map(|c| {
            let mut r = vec![
                num17(c.lambda),
                num17(c.alpha),
                num17(c.mean_mse),
                num17(c.mean_r2),
                u8::from(c.converged).to_string(),
                c.error.clone().unwrap_or_default(),
            ];
            r.extend(c.fold_mse.iter().map(|&m| num17(m)));
            r
        })
        .collect();
    table(path, &header, &rows)
}

pub fn write_coefficients(path: &Path, model: &FittedModel) -> Result<()> {
    let mut rows = vec![vec![
        "(intercept)".to_string(),
        String::new(),
        String::new(),
        String::new(),
        num17(model.intercept),
        num17(model.raw_intercept),
    ]];
    for j in 0..model.width() {
        rows.push(vec![
            model.column_names[j].clone(),
            num17(model.stats.means[j]),
            num17(model.stats.stds[j]),
            u8::from(model.stats.zero_variance[j]).to_string(),
            num17(model.coefficients[j]),
            num17(model.raw_coefficients[j]),
        ]);
    }
    table(
        path,
        &strs(&["column", "mean", "std", "zero_variance", "coefficient", "raw_coefficient"]),
        &rows,
    )
}

pub fn write_fitted(path: &Path, fitted: &[FittedRow]) -> Result<()> {
    let rows: Vec<Vec<String>> = fitted
        .iter()
        .map(|r| vec![r.entity.clone(), r.period.clone(), num17(r.actual), num17(r.fitted), num17(r.residual)])
        .collect();
    table(path, &strs(&["entity", "period", "actual", "fitted", "residual"]), &rows)
}

pub fn write_path(path: &Path, points: &[PathPoint], column_names: &[String]) -> Result<()> {
    let mut header = vec!["lambda".to_string()];
    header.extend(column_names.iter().cloned());
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let mut r = vec![num17(p.lambda)];
            r.extend(p.coefficients.iter().map(|&b| num17(b)));
            r
        })
        .collect();
    table(path, &header, &rows)
}

pub fn write_forecast(path: &Path, forecast: &ForecastReport, labels: &[Label]) -> Result<()> {
    let rows: Vec<Vec<String>> = forecast
        .rows
        .iter()
        .zip(labels)
        .map(|(r, l)| {
            vec![
                r.entity.clone(),
                r.period.clone(),
                label_str(*l),
                num17(r.predicted_log),
                opt(r.actual_log),
                num17(r.predicted),
                opt(r.actual),
                opt(r.relative_error),
            ]
        })
        .collect();
    table(
        path,
        &strs(&[
            "entity",
            "period",
            "cluster",
            "predicted_log",
            "actual_log",
            "predicted",
            "actual",
            "relative_error",
        ]),
        &rows,
    )
}

pub fn write_fit_scatter(path: &Path, fitted: &[FittedRow], test: Option<&TestArtifacts>) -> Result<()> {
    let mut rows: Vec<Vec<String>> = fitted
        .iter()
        .map(|r| vec![r.entity.clone(), r.period.clone(), "train".into(), num17(r.actual), num17(r.fitted)])
        .collect();
    if let Some(t) = test {
        rows.extend(t.forecast.rows.iter().map(|r| {
            vec![r.entity.clone(), r.period.clone(), "test".into(), opt(r.actual_log), num17(r.predicted_log)]
        }));
    }
    table(path, &strs(&["entity", "period", "split", "actual", "predicted"]), &rows)
}

/// JSON number with 17 significant digits; non-finite values become null.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(serde_json::from_str(&num17(x)).expect("formatted float is valid JSON"))
    } else {
        Value::Null
    }
}

fn jopt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, jnum)
}

pub fn metrics_json(m: &Metrics) -> Value {
    json!({ "rows": m.rows, "mse": jnum(m.mse), "r2": jopt(m.r2), "sparsity": jnum(m.sparsity) })
}

pub fn cluster_json(m: &ClusterModel) -> Value {
    json!({
        "eps": jnum(m.params.eps),
        "min_pts": m.params.min_pts,
        "core_strict": m.params.core_strict,
        "k": m.k,
        "noise": m.noise_count(),
        "sizes": m.cluster_sizes(),
        "sc": jopt(m.sc),
        "sse": jnum(m.sse),
    })
}

fn train_json(t: &TrainArtifacts) -> Map<String, Value> {
    let mut s = Map::new();
    s.insert("rows".into(), json!(t.rows.len()));
    s.insert("clusters".into(), cluster_json(&t.clusters.model));
    s.insert("dummy_columns".into(), json!(t.dummies.len()));
    s.insert("excluded_noise_rows".into(), json!(t.dropped_rows.len()));
    s.insert(
        "penalty".into(),
        json!({
            "kind": t.model.penalty.kind.as_str(),
            "lambda": jnum(t.model.penalty.lambda),
            "alpha": jnum(t.model.penalty.mixing()),
        }),
    );
    s.insert("iterations".into(), json!(t.model.diagnostics.iterations));
    s.insert("train".into(), metrics_json(&t.train_metrics));
    s.insert("validation".into(), metrics_json(&t.validation_metrics));
    s.insert(
        "holdout".into(),
        t.holdout_metrics.as_ref().map_or(Value::Null, metrics_json),
    );
    s
}

pub fn summary_json(report: &RunReport) -> Value {
    let mut s = train_json(&report.train);
    s.insert(
        "split".into(),
        report.split.as_ref().map_or(Value::Null, |sp| {
            json!({ "train_periods": sp.train_periods, "test_periods": sp.test_periods, "cv_folds": sp.cv_folds })
        }),
    );
    match &report.test {
        Some(t) => {
            s.insert("test".into(), t.metrics.as_ref().map_or(Value::Null, metrics_json));
            s.insert(
                "forecast".into(),
                json!({
                    "rows": t.forecast.rows.len(),
                    "excluded_noise_rows": t.dropped_rows.len(),
                    "test_noise_rows": t.labels.iter().filter(|l| l.is_none()).count(),
                    "mean_error": jopt(t.forecast.mean_error),
                    "error_variance": jopt(t.forecast.error_variance),
                }),
            );
        }
        None => {
            s.insert("test".into(), Value::Null);
            s.insert("forecast".into(), Value::Null);
        }
    }
    s.insert(
        "full_clusters".into(),
        report.full_clusters.as_ref().map_or(Value::Null, |(_, m)| cluster_json(m)),
    );
    s.insert("notes".into(), json!(report.notes));
    Value::Object(s)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DprError::InvalidArgument(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Files of the training stage, shared by `write_run_report` and the
/// staged commands.
pub fn write_training(dir: &Path, t: &TrainArtifacts) -> Result<()> {
    write_clusters(&dir.join("clusters.csv"), &t.rows, &t.clusters.model)?;
    write_k_distance(&dir.join("k_distance.csv"), &t.clusters.k_distance)?;
    if let Some(scan) = &t.clusters.scan {
        write_scan(&dir.join("scan.csv"), scan)?;
    }
    write_cv_table(&dir.join("cv_table.csv"), &t.cv)?;
    write_coefficients(&dir.join("coefficients.csv"), &t.model)?;
    write_fitted(&dir.join("fitted.csv"), &t.fitted)?;
    write_path(&dir.join("path_trajectories.csv"), &t.path, &t.model.column_names)?;
    let mut model = Vec::new();
    t.bundle.write(&mut model)?;
    fs::write(dir.join("model.txt"), model)?;
    Ok(())
}

/// Writes the full report into `out`, atomically.
pub fn write_run_report(out: &Path, report: &RunReport) -> Result<()> {
    write_dir_atomic(out, |dir| {
        write_training(dir, &report.train)?;
        if let Some(t) = &report.test {
            write_assignments(&dir.join("test_clusters.csv"), &t.rows, &t.labels)?;
            let labels: Vec<Label> = t.predicted_rows.iter().map(|&i| t.labels[i]).collect();
            write_forecast(&dir.join("forecast.csv"), &t.forecast, &labels)?;
        }
        if let Some((ids, m)) = &report.full_clusters {
            write_clusters(&dir.join("full_clusters.csv"), ids, m)?;
        }
        write_fit_scatter(&dir.join("fit_scatter.csv"), &report.train.fitted, report.test.as_ref())?;
        fs::write(dir.join("config.toml"), report.config.to_toml())?;
        write_json(&dir.join("summary.json"), &summary_json(report))
    })
}
