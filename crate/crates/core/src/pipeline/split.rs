use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data_model::PanelDataset;
use crate::error::{DprError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_periods: Vec<String>,
    pub test_periods: Vec<String>,
    pub cv_folds: usize,
}

impl SplitSpec {
    /// Holds out the last `test_count` periods of `periods`.
    pub fn last_periods(periods: &[String], test_count: usize, cv_folds: usize) -> Result<Self> {
        if test_count >= periods.len() {
            return Err(DprError::InvalidArgument(format!(
                "cannot hold out {test_count} of {} periods",
                periods.len()
            )));
        }
        let cut = periods.len() - test_count;
        Ok(SplitSpec {
            train_periods: periods[..cut].to_vec(),
            test_periods: periods[cut..].to_vec(),
            cv_folds,
        })
    }

    pub fn validate(&self, periods: &[String]) -> Result<()> {
        if self.train_periods.is_empty() || self.test_periods.is_empty() {
            return Err(DprError::InvalidArgument("train and test periods must both be non-empty".into()));
        }
        if self.cv_folds < 2 {
            return Err(DprError::InvalidArgument("cv_folds must be >= 2".into()));
        }
        let joined: Vec<&String> = self.train_periods.iter().chain(&self.test_periods).collect();
        let matches = joined.len() == periods.len() && joined.iter().zip(periods).all(|(a, b)| *a == b);
        if !matches {
            return Err(DprError::InvalidArgument(
                "split must be an order-preserving prefix/suffix partition of the dataset periods".into(),
            ));
        }
        Ok(())
    }
}

/// Splits by period. The train side never contains a test-period row.
pub fn chronological_split(data: &PanelDataset, spec: &SplitSpec) -> Result<(PanelDataset, PanelDataset)> {
    spec.validate(data.periods())?;
    let train: HashSet<&str> = spec.train_periods.iter().map(String::as_str).collect();
    let tr = data.filter_periods(|p| train.contains(p));
    let te = data.filter_periods(|p| !train.contains(p));
    if tr.is_empty() || te.is_empty() {
        return Err(DprError::InvalidArgument("split leaves one side without observations".into()));
    }
    Ok((tr, te))
}
