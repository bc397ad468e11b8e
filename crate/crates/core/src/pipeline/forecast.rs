use serde::{Deserialize, Serialize};

use crate::data_model::inverse_log;
use crate::error::{DprError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub entity: String,
    pub period: String,
    pub predicted_log: f64,
    pub actual_log: Option<f64>,
    /// Back-transformed prediction, `exp(v) - log_offset`.
    pub predicted: f64,
    pub actual: Option<f64>,
    /// `|predicted - actual| / actual` in source units.
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub rows: Vec<ForecastRow>,
    /// Mean of `predicted_log - actual_log` over rows with an actual value.
    pub mean_error: Option<f64>,
    /// Population variance of the same differences.
    pub error_variance: Option<f64>,
}

/// Relative deviation in source units between a log-scale prediction and
/// the log-scale actual it is compared against. `None` when the actual is
/// not positive in source units.
pub fn relative_error(predicted_log: f64, actual_log: f64, log_offset: f64) -> Option<f64> {
    let p = inverse_log(predicted_log, log_offset);
    let a = inverse_log(actual_log, log_offset);
    (a > 0.0).then(|| (p - a).abs() / a)
}

/// Mean and population variance of `predicted - actual`.
pub fn error_summary(pairs: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|(p, a)| p - a).sum::<f64>() / n;
    let var = pairs.iter().map(|(p, a)| (p - a - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var))
}

/// Builds the per-row forecast table and its summary. `ids`, `predicted`
/// and `actual` are aligned; values are on the log scale.
pub fn forecast_report(
    ids: &[(String, String)],
    predicted: &[f64],
    actual: &[Option<f64>],
    log_offset: f64,
) -> Result<ForecastReport> {
    if ids.len() != predicted.len() || ids.len() != actual.len() {
        return Err(DprError::DimensionMismatch {
            expected: ids.len(),
            got: predicted.len().min(actual.len()),
        });
    }
    let mut rows = Vec::with_capacity(ids.len());
    for ((id, &p), &a) in ids.iter().zip(predicted).zip(actual) {
        if !p.is_finite() || a.is_some_and(|v| !v.is_finite()) {
            return Err(DprError::InvalidArgument(format!(
                "row ({}, {}) cannot be back-transformed",
                id.0, id.1
            )));
        }
        rows.push(ForecastRow {
            entity: id.0.clone(),
            period: id.1.clone(),
            predicted_log: p,
            actual_log: a,
            predicted: inverse_log(p, log_offset),
            actual: a.map(|v| inverse_log(v, log_offset)),
            relative_error: a.and_then(|v| relative_error(p, v, log_offset)),
        });
    }
    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.actual_log.map(|a| (r.predicted_log, a)))
        .collect();
    let summary = error_summary(&pairs);
    Ok(ForecastReport {
        rows,
        mean_error: summary.map(|s| s.0),
        error_variance: summary.map(|s| s.1),
    })
}
