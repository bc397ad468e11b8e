use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DprError, Result};

/// Regression design: the raw columns, their standardized counterparts and
/// the statistics that map one onto the other. `y` is never scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub raw: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub column_names: Vec<String>,
    pub stats: ColumnStats,
    pub standardized: bool,
}

/// Per-column centering and scaling. Zero-variance columns keep their raw
/// values and take no part in fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl ColumnStats {
    pub fn width(&self) -> usize {
        self.means.len()
    }

    /// Indices of the columns that carry a coefficient.
    pub fn active(&self) -> Vec<usize> {
        (0..self.width()).filter(|&j| !self.zero_variance[j]).collect()
    }

    pub fn standardize_value(&self, j: usize, v: f64) -> f64 {
        if self.zero_variance[j] {
            v
        } else {
            (v - self.means[j]) / self.stds[j]
        }
    }

    pub fn apply(&self, raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if raw.ncols() != self.width() {
            return Err(DprError::DimensionMismatch {
                expected: self.width(),
                got: raw.ncols(),
            });
        }
        Ok(DMatrix::from_fn(raw.nrows(), raw.ncols(), |i, j| {
            self.standardize_value(j, raw[(i, j)])
        }))
    }
}

fn column_stats(raw: &DMatrix<f64>) -> ColumnStats {
    let n = raw.nrows() as f64;
    let mut means = Vec::with_capacity(raw.ncols());
    let mut stds = Vec::with_capacity(raw.ncols());
    let mut zero_variance = Vec::with_capacity(raw.ncols());
    for col in raw.column_iter() {
        let mean = col.iter().sum::<f64>() / n;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let std = (ss / (n - 1.0)).sqrt();
        let constant = col.iter().all(|&v| v == col[0]) || std <= 1e-12 * mean.abs().max(1.0);
        means.push(mean);
        stds.push(if constant { 0.0 } else { std });
        zero_variance.push(constant);
    }
    ColumnStats {
        means,
        stds,
        zero_variance,
    }
}

/// Centers and scales every column by its sample mean and sample standard
/// deviation (n - 1 denominator).
pub fn standardize(raw: &DMatrix<f64>, y: &[f64], column_names: Vec<String>) -> Result<DesignMatrix> {
    let n = raw.nrows();
    if n < 2 {
        return Err(DprError::InvalidArgument(format!("standardize needs at least 2 rows, got {n}")));
    }
    if y.len() != n {
        return Err(DprError::DimensionMismatch { expected: n, got: y.len() });
    }
    if column_names.len() != raw.ncols() {
        return Err(DprError::DimensionMismatch {
            expected: raw.ncols(),
            got: column_names.len(),
        });
    }
    if raw.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(DprError::InvalidArgument("design contains NaN or infinite values".into()));
    }
    let stats = column_stats(raw);
    let x = stats.apply(raw)?;
    Ok(DesignMatrix {
        raw: raw.clone(),
        x,
        y: y.to_vec(),
        column_names,
        stats,
        standardized: true,
    })
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// Re-standardizes the selected rows from their raw values.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DesignMatrix> {
        let raw = self.raw.select_rows(rows);
        let y: Vec<f64> = rows.iter().map(|&i| self.y[i]).collect();
        standardize(&raw, &y, self.column_names.clone())
    }

    /// Appends raw columns and re-standardizes.
    pub fn with_columns(&self, extra: &DMatrix<f64>, names: Vec<String>) -> Result<DesignMatrix> {
        if extra.nrows() != self.nrows() {
            return Err(DprError::DimensionMismatch {
                expected: self.nrows(),
                got: extra.nrows(),
            });
        }
        let p = self.raw.ncols();
        let raw = DMatrix::from_fn(self.nrows(), p + extra.ncols(), |i, j| {
            if j < p { self.raw[(i, j)] } else { extra[(i, j - p)] }
        });
        let mut all = self.column_names.clone();
        all.extend(names);
        standardize(&raw, &self.y, all)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }

    pub fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}
