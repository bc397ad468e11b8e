use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clustering::Label;
use crate::error::{DprError, Result};
use crate::penalized::DesignMatrix;

/// What to do with noise rows when building cluster dummies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutlierPolicy {
    /// One indicator column per noise row.
    #[default]
    UniqueDummy,
    /// Drop noise rows from the design.
    Exclude,
}

impl std::str::FromStr for OutlierPolicy {
    type Err = DprError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "unique_dummy" | "unique" => Ok(OutlierPolicy::UniqueDummy),
            "exclude" => Ok(OutlierPolicy::Exclude),
            _ => Err(DprError::InvalidArgument(format!("unknown outlier policy '{s}'"))),
        }
    }
}

/// Meaning of an appended indicator column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DummyColumn {
    Cluster(usize),
    /// Singleton column for the noise row with this index in the input design.
    Noise(usize),
}

impl DummyColumn {
    pub fn default_name(&self) -> String {
        match self {
            DummyColumn::Cluster(c) => format!("cluster_{c}"),
            DummyColumn::Noise(i) => format!("noise_{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub design: DesignMatrix,
    /// Input rows present in `design`, in order.
    pub kept_rows: Vec<usize>,
    /// Noise rows removed under [`OutlierPolicy::Exclude`].
    pub dropped_rows: Vec<usize>,
    pub dummies: Vec<DummyColumn>,
}

/// Appends one 0/1 column per non-baseline cluster (and per noise row under
/// `UniqueDummy`) and re-standardizes the full design.
pub fn augment_with_dummies(
    dm: &DesignMatrix,
    labels: &[Label],
    k: usize,
    policy: OutlierPolicy,
    baseline: usize,
) -> Result<Augmented> {
    if labels.len() != dm.nrows() {
        return Err(DprError::DimensionMismatch {
            expected: dm.nrows(),
            got: labels.len(),
        });
    }
    if let Some(bad) = labels.iter().flatten().find(|&&c| c >= k) {
        return Err(DprError::InvalidArgument(format!("unknown cluster label {bad} (k = {k})")));
    }
    if !labels.contains(&Some(baseline)) {
        return Err(DprError::InvalidArgument(format!("baseline cluster {baseline} has no members")));
    }

    let (kept_rows, dropped_rows): (Vec<usize>, Vec<usize>) = match policy {
        OutlierPolicy::UniqueDummy => ((0..labels.len()).collect(), Vec::new()),
        OutlierPolicy::Exclude => (0..labels.len()).partition(|&i| labels[i].is_some()),
    };

    let mut dummies: Vec<DummyColumn> = (0..k).filter(|&c| c != baseline).map(DummyColumn::Cluster).collect();
    if policy == OutlierPolicy::UniqueDummy {
        dummies.extend(kept_rows.iter().filter(|&&i| labels[i].is_none()).map(|&i| DummyColumn::Noise(i)));
    }

    let extra = DMatrix::from_fn(kept_rows.len(), dummies.len(), |r, c| {
        let row = kept_rows[r];
        let hit = match dummies[c] {
            DummyColumn::Cluster(id) => labels[row] == Some(id),
            DummyColumn::Noise(i) => i == row,
        };
        if hit { 1.0 } else { 0.0 }
    });
    let base = if dropped_rows.is_empty() {
        dm.clone()
    } else {
        dm.select_rows(&kept_rows)?
    };
    let names = dummies.iter().map(DummyColumn::default_name).collect();
    let design = base.with_columns(&extra, names)?;
    Ok(Augmented {
        design,
        kept_rows,
        dropped_rows,
        dummies,
    })
}

/// Raw indicator values for a row with cluster `label` that was not part
/// of the training design; noise columns are always 0 for such rows.
pub fn dummy_row(dummies: &[DummyColumn], label: Label) -> Vec<f64> {
    dummies
        .iter()
        .map(|d| match d {
            DummyColumn::Cluster(c) if label == Some(*c) => 1.0,
            _ => 0.0,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalized::standardize;

    fn base(n: usize) -> DesignMatrix {
        let raw = DMatrix::from_fn(n, 1, |i, _| i as f64);
        let y: Vec<f64> = (0..n).map(|i| i as f64).collect();
        standardize(&raw, &y, vec!["x".into()]).unwrap()
    }

    #[test]
    fn sixteen_clusters_add_fifteen_columns() {
        let labels: Vec<Label> = (0..32).map(|i| Some(i % 16)).collect();
        let a = augment_with_dummies(&base(32), &labels, 16, OutlierPolicy::UniqueDummy, 0).unwrap();
        assert_eq!(a.design.ncols(), 1 + 15);
        assert_eq!(a.dummies.len(), 15);
    }

    #[test]
    fn single_cluster_adds_nothing() {
        let labels = vec![Some(0); 4];
        let a = augment_with_dummies(&base(4), &labels, 1, OutlierPolicy::UniqueDummy, 0).unwrap();
        assert_eq!(a.design.ncols(), 1);
    }

    #[test]
    fn noise_rows_get_singleton_columns() {
        let labels = vec![Some(0), None, Some(0), None, Some(1), None, Some(1)];
        let a = augment_with_dummies(&base(7), &labels, 2, OutlierPolicy::UniqueDummy, 0).unwrap();
        assert_eq!(a.dummies, vec![DummyColumn::Cluster(1), DummyColumn::Noise(1), DummyColumn::Noise(3), DummyColumn::Noise(5)]);
        for c in 2..5 {
            let sum: f64 = a.design.raw.column(c).iter().sum();
            assert_eq!(sum, 1.0);
        }
    }

    #[test]
    fn exclude_drops_noise_rows() {
        let labels = vec![Some(0), None, Some(0), Some(1), Some(1)];
        let a = augment_with_dummies(&base(5), &labels, 2, OutlierPolicy::Exclude, 1).unwrap();
        assert_eq!(a.dropped_rows, vec![1]);
        assert_eq!(a.kept_rows, vec![0, 2, 3, 4]);
        assert_eq!(a.design.nrows(), 4);
        assert_eq!(a.dummies, vec![DummyColumn::Cluster(0)]);
    }

    #[test]
    fn rejects_unknown_label_and_missing_baseline() {
        let labels = vec![Some(0), Some(3)];
        assert!(augment_with_dummies(&base(2), &labels, 2, OutlierPolicy::UniqueDummy, 0).is_err());
        let labels = vec![Some(0), Some(0)];
        assert!(augment_with_dummies(&base(2), &labels, 2, OutlierPolicy::UniqueDummy, 1).is_err());
    }

    #[test]
    fn unseen_rows_use_cluster_columns_only() {
        let d = [DummyColumn::Cluster(1), DummyColumn::Noise(0), DummyColumn::Cluster(2)];
        assert_eq!(dummy_row(&d, Some(2)), vec![0.0, 0.0, 1.0]);
        assert_eq!(dummy_row(&d, None), vec![0.0, 0.0, 0.0]);
    }
}
