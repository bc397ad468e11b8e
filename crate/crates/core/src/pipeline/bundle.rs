//! Everything needed to forecast new rows with a trained model, stored as
//! a tab-separated text record with one keyed line per item.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::clustering::{nearest_core_label, Label};
use crate::data_model::{energy_mix_features, log_transform, per_feature_max_with, NormalizeMode, PanelDataset, TransformSpec};
use crate::error::{DprError, Result};
use crate::fmt::num17;
use crate::penalized::{ColumnStats, PenaltyKind, PenaltySpec};

use super::dummies::{dummy_row, DummyColumn, OutlierPolicy};

const MAGIC: &str = "dpr-model\t1";

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub feature_names: Vec<String>,
    pub transform: TransformSpec,
    pub eps: f64,
    /// Training core points as `(cluster id, mix coordinates)`.
    pub cores: Vec<(usize, Vec<f64>)>,
    /// Training per-entity maxima, only used by `PerFeatureMax`.
    pub entity_max: BTreeMap<String, Vec<f64>>,
    pub outlier_policy: OutlierPolicy,
    pub dummies: Vec<DummyColumn>,
    pub penalty: PenaltySpec,
    pub column_names: Vec<String>,
    pub stats: ColumnStats,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Predictions for the rows of a panel that the bundle could score.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Cluster of every input row.
    pub labels: Vec<Label>,
    /// Input rows that received a prediction.
    pub rows: Vec<usize>,
    /// Log-scale predictions aligned to `rows`.
    pub predicted: Vec<f64>,
}

impl ModelBundle {
    /// Clustering features of `data`, scaled the way the training rows were.
    pub fn mix(&self, data: &PanelDataset) -> DMatrix<f64> {
        match self.transform.normalize_mode {
            NormalizeMode::PerFeatureMax => per_feature_max_with(data, &self.entity_max).values,
            mode => energy_mix_features(data, mode).values,
        }
    }

    pub fn assign(&self, data: &PanelDataset) -> Vec<Label> {
        let mix = self.mix(data);
        (0..mix.nrows())
            .map(|i| {
                let x: Vec<f64> = mix.row(i).iter().copied().collect();
                nearest_core_label(&self.cores, self.eps, &x)
            })
            .collect()
    }

    /// Design row in raw column space: log features then dummy indicators.
    fn design_row(&self, log_features: &[f64], label: Label) -> Vec<f64> {
        let mut row = log_features.to_vec();
        row.extend(dummy_row(&self.dummies, label));
        row
    }

    pub fn predict_row(&self, raw: &[f64]) -> f64 {
        self.intercept
            + self
                .stats
                .active()
                .into_iter()
                .map(|j| self.coefficients[j] * self.stats.standardize_value(j, raw[j]))
                .sum::<f64>()
    }

    pub fn predict(&self, data: &PanelDataset) -> Result<Prediction> {
        if data.feature_names() != self.feature_names.as_slice() {
            return Err(DprError::InvalidArgument(format!(
                "panel features {:?} do not match the model's {:?}",
                data.feature_names(),
                self.feature_names
            )));
        }
        let labels = self.assign(data);
        let logged = log_transform(data, &self.transform)?;
        let mut rows = Vec::new();
        let mut predicted = Vec::new();
        for (i, o) in logged.observations().iter().enumerate() {
            if labels[i].is_none() && self.outlier_policy == OutlierPolicy::Exclude {
                continue;
            }
            rows.push(i);
            predicted.push(self.predict_row(&self.design_row(&o.features, labels[i])));
        }
        Ok(Prediction { labels, rows, predicted })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut lines: Vec<Vec<String>> = Vec::new();
        let mut features = vec!["features".to_string()];
        features.extend(self.feature_names.iter().cloned());
        lines.push(features);
        lines.push(vec!["log_offset".into(), num17(self.transform.log_offset)]);
        lines.push(vec!["normalize_mode".into(), mode_name(self.transform.normalize_mode).into()]);
        lines.push(vec!["eps".into(), num17(self.eps)]);
        lines.push(vec!["outlier_policy".into(), policy_name(self.outlier_policy).into()]);
        lines.push(vec![
            "penalty".into(),
            self.penalty.kind.as_str().into(),
            num17(self.penalty.lambda),
            self.penalty.alpha.map_or("-".into(), num17),
        ]);
        lines.push(vec!["intercept".into(), num17(self.intercept)]);
        let n_features = self.feature_names.len();
        for j in 0..self.column_names.len() {
            let role = if j < n_features {
                "feature".to_string()
            } else {
                match self.dummies[j - n_features] {
                    DummyColumn::Cluster(c) => format!("cluster:{c}"),
                    DummyColumn::Noise(i) => format!("noise:{i}"),
                }
            };
            lines.push(vec![
                "column".into(),
                self.column_names[j].clone(),
                role,
                num17(self.stats.means[j]),
                num17(self.stats.stds[j]),
                if self.stats.zero_variance[j] { "1" } else { "0" }.into(),
                num17(self.coefficients[j]),
            ]);
        }
        for (c, x) in &self.cores {
            let mut line = vec!["core".to_string(), c.to_string()];
            line.extend(x.iter().map(|&v| num17(v)));
            lines.push(line);
        }
        for (e, m) in &self.entity_max {
            let mut line = vec!["entity_max".to_string(), e.clone()];
            line.extend(m.iter().map(|&v| num17(v)));
            lines.push(line);
        }
        writeln!(w, "{MAGIC}")?;
        for line in lines {
            if line.iter().any(|f| f.contains(['\t', '\n', '\r'])) {
                return Err(DprError::InvalidArgument(format!("name in '{}' contains a tab or newline", line[0])));
            }
            writeln!(w, "{}", line.join("\t"))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: String| DprError::Config(format!("model file: {msg}"));
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(l)) if l == MAGIC => {}
            _ => return Err(bad("missing header".into())),
        }
        let mut b = ModelBundle {
            feature_names: Vec::new(),
            transform: TransformSpec::default(),
            eps: f64::NAN,
            cores: Vec::new(),
            entity_max: BTreeMap::new(),
            outlier_policy: OutlierPolicy::default(),
            dummies: Vec::new(),
            penalty: PenaltySpec::ridge(0.0),
            column_names: Vec::new(),
            stats: ColumnStats {
                means: Vec::new(),
                stds: Vec::new(),
                zero_variance: Vec::new(),
            },
            intercept: f64::NAN,
            coefficients: Vec::new(),
        };
        for (n, line) in lines.enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split('\t').collect();
            let num = |i: usize| -> Result<f64> {
                f.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(format!("line {}: expected a number in field {}", n + 2, i + 1)))
            };
            match f[0] {
                "features" => b.feature_names = f[1..].iter().map(|s| s.to_string()).collect(),
                "log_offset" => b.transform.log_offset = num(1)?,
                "normalize_mode" => b.transform.normalize_mode = f.get(1).unwrap_or(&"").parse()?,
                "eps" => b.eps = num(1)?,
                "outlier_policy" => b.outlier_policy = f.get(1).unwrap_or(&"").parse()?,
                "penalty" => {
                    let kind: PenaltyKind = f.get(1).unwrap_or(&"").parse()?;
                    let alpha = if f.get(3) == Some(&"-") { 0.0 } else { num(3)? };
                    b.penalty = PenaltySpec::of_kind(kind, num(2)?, alpha);
                }
                "intercept" => b.intercept = num(1)?,
                "column" => {
                    b.column_names.push(f.get(1).unwrap_or(&"").to_string());
                    let role = *f.get(2).unwrap_or(&"");
                    if let Some(c) = role.strip_prefix("cluster:") {
                        b.dummies.push(DummyColumn::Cluster(c.parse().map_err(|_| bad(format!("bad role '{role}'")))?));
                    } else if let Some(i) = role.strip_prefix("noise:") {
                        b.dummies.push(DummyColumn::Noise(i.parse().map_err(|_| bad(format!("bad role '{role}'")))?));
                    } else if role != "feature" {
                        return Err(bad(format!("bad role '{role}'")));
                    }
                    b.stats.means.push(num(3)?);
                    b.stats.stds.push(num(4)?);
                    b.stats.zero_variance.push(f.get(5) == Some(&"1"));
                    b.coefficients.push(num(6)?);
                }
                "core" => {
                    let c = f.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad(format!("line {}: bad core id", n + 2)))?;
                    let x = (2..f.len()).map(num).collect::<Result<Vec<_>>>()?;
                    b.cores.push((c, x));
                }
                "entity_max" => {
                    let x = (2..f.len()).map(num).collect::<Result<Vec<_>>>()?;
                    b.entity_max.insert(f.get(1).unwrap_or(&"").to_string(), x);
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }
        let p = b.feature_names.len();
        if b.column_names.len() != p + b.dummies.len() || b.cores.iter().any(|(_, x)| x.len() != p) || !b.eps.is_finite() || !b.intercept.is_finite() {
            return Err(bad("inconsistent record".into()));
        }
        Ok(b)
    }
}

fn mode_name(m: NormalizeMode) -> &'static str {
    match m {
        NormalizeMode::RawShares => "raw_shares",
        NormalizeMode::PerFeatureMax => "per_feature_max",
        NormalizeMode::RowMax => "row_max",
        NormalizeMode::None => "none",
    }
}

fn policy_name(p: OutlierPolicy) -> &'static str {
    match p {
        OutlierPolicy::UniqueDummy => "unique_dummy",
        OutlierPolicy::Exclude => "exclude",
    }
}
