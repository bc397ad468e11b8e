//! Panel data ingestion and the transforms applied before clustering and
//! regression: emission accounting, the offset log transform, and the
//! energy-mix normalizations used as clustering features.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CellLocation, DprError, Result};
use crate::fmt::num17;

/// One (entity, period) record. `entity` and `period` index into the owning
/// dataset's label lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub entity: usize,
    pub period: usize,
    pub features: Vec<f64>,
    pub target: Option<f64>,
}

/// A labelled record before indexing, as produced by readers and generators.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub entity: String,
    pub period: String,
    pub features: Vec<f64>,
    pub target: Option<f64>,
}

/// Long-format panel: one observation per (entity, period), sorted by entity
/// label then period order.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    entities: Vec<String>,
    periods: Vec<String>,
    feature_names: Vec<String>,
    observations: Vec<Observation>,
    log_offset: Option<f64>,
}

/// Orders period labels numerically when every label parses as a number,
/// lexicographically otherwise.
fn sort_periods(periods: &mut [String]) {
    let numeric = periods.iter().all(|p| p.trim().parse::<f64>().is_ok());
    if numeric {
        periods.sort_by(|a, b| {
            let x: f64 = a.trim().parse().unwrap();
            let y: f64 = b.trim().parse().unwrap();
            x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
        });
    } else {
        periods.sort();
    }
}

impl PanelDataset {
    /// Builds a validated dataset from labelled records. Row order of the
    /// input does not matter.
    pub fn from_records(feature_names: Vec<String>, records: Vec<RawRecord>) -> Result<Self> {
        let width = feature_names.len();
        let mut entity_set: Vec<String> = records.iter().map(|r| r.entity.clone()).collect();
        entity_set.sort();
        entity_set.dedup();
        let mut period_set: Vec<String> = records.iter().map(|r| r.period.clone()).collect();
        period_set.sort();
        period_set.dedup();
        sort_periods(&mut period_set);

        let entity_index: HashMap<&str, usize> = entity_set
            .iter()
            .enumerate()
            .map(|(i, e)| (e.as_str(), i))
            .collect();
        let period_index: HashMap<&str, usize> = period_set
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect();

        let mut seen = HashSet::new();
        let mut observations = Vec::with_capacity(records.len());
        for (row, r) in records.iter().enumerate() {
            if r.features.len() != width {
                return Err(DprError::DimensionMismatch {
                    expected: width,
                    got: r.features.len(),
                });
            }
            for (j, &v) in r.features.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(DprError::NegativeValue {
                        value: v,
                        location: CellLocation {
                            row: row + 1,
                            column: feature_names[j].clone(),
                        },
                    });
                }
            }
            let entity = entity_index[r.entity.as_str()];
            let period = period_index[r.period.as_str()];
            if !seen.insert((entity, period)) {
                return Err(DprError::DuplicateObservation {
                    entity: r.entity.clone(),
                    period: r.period.clone(),
                    location: CellLocation {
                        row: row + 1,
                        column: "<entity,period>".into(),
                    },
                });
            }
            observations.push(Observation {
                entity,
                period,
                features: r.features.clone(),
                target: r.target,
            });
        }
        observations.sort_by_key(|o| (o.entity, o.period));

        Ok(PanelDataset {
            entities: entity_set,
            periods: period_set,
            feature_names,
            observations,
            log_offset: None,
        })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Offset used if this dataset has been log-transformed.
    pub fn log_offset(&self) -> Option<f64> {
        self.log_offset
    }

    pub fn entity_label(&self, obs: &Observation) -> &str {
        &self.entities[obs.entity]
    }

    pub fn period_label(&self, obs: &Observation) -> &str {
        &self.periods[obs.period]
    }

    /// Feature rows as an n×p matrix, aligned to `observations()`.
    pub fn feature_matrix(&self) -> DMatrix<f64> {
        let p = self.feature_names.len();
        DMatrix::from_fn(self.len(), p, |i, j| self.observations[i].features[j])
    }

    /// Targets in row order; errors if any row lacks one.
    pub fn targets(&self) -> Result<Vec<f64>> {
        self.observations
            .iter()
            .map(|o| {
                o.target.ok_or_else(|| {
                    DprError::InvalidArgument(format!(
                        "observation ({}, {}) has no target",
                        self.entity_label(o),
                        self.period_label(o)
                    ))
                })
            })
            .collect()
    }

    pub fn to_records(&self) -> Vec<RawRecord> {
        self.observations
            .iter()
            .map(|o| RawRecord {
                entity: self.entities[o.entity].clone(),
                period: self.periods[o.period].clone(),
                features: o.features.clone(),
                target: o.target,
            })
            .collect()
    }

    /// Keeps the observations whose period label satisfies `keep`; labels
    /// absent from the result are dropped from the entity and period lists.
    pub fn filter_periods<F: Fn(&str) -> bool>(&self, keep: F) -> PanelDataset {
        let records = self
            .to_records()
            .into_iter()
            .filter(|r| keep(&r.period))
            .collect();
        let mut out = PanelDataset::from_records(self.feature_names.clone(), records)
            .expect("subset of a valid panel is valid");
        out.log_offset = self.log_offset;
        out
    }

    fn with_values(&self, observations: Vec<Observation>, log_offset: Option<f64>) -> PanelDataset {
        PanelDataset {
            entities: self.entities.clone(),
            periods: self.periods.clone(),
            feature_names: self.feature_names.clone(),
            observations,
            log_offset,
        }
    }
}

/// Column mapping for [`load_panel`]. An empty feature list selects every
/// column not named as entity, period or target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSchema {
    pub entity: String,
    pub period: String,
    pub target: Option<String>,
    #[serde(default)]
    pub features: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

impl PanelSchema {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DprError::Config(format!("schema: {e}")))
    }
}

fn default_delimiter() -> char {
    ','
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            entity: "entity".into(),
            period: "period".into(),
            target: Some("target".into()),
            features: Vec::new(),
            delimiter: ',',
        }
    }
}

fn delimiter_byte(c: char) -> Result<u8> {
    if c.is_ascii() {
        Ok(c as u8)
    } else {
        Err(DprError::InvalidArgument(format!("delimiter '{c}' is not ASCII")))
    }
}

fn parse_cell(value: &str, row: usize, column: &str) -> Result<f64> {
    value.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| DprError::NonNumeric {
        value: value.to_string(),
        location: CellLocation {
            row,
            column: column.to_string(),
        },
    })
}

/// Reads a delimited table with a header row into a validated panel.
pub fn load_panel<R: Read>(source: R, schema: &PanelSchema) -> Result<PanelDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter_byte(schema.delimiter)?)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DprError::MissingColumn(name.to_string()))
    };
    let entity_col = find(&schema.entity)?;
    let period_col = find(&schema.period)?;
    let target_col = schema.target.as_deref().map(find).transpose()?;

    let feature_cols: Vec<(usize, String)> = if schema.features.is_empty() {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != entity_col && *i != period_col && Some(*i) != target_col)
            .map(|(i, h)| (i, h.to_string()))
            .collect()
    } else {
        schema
            .features
            .iter()
            .map(|f| find(f).map(|i| (i, f.clone())))
            .collect::<Result<_>>()?
    };

    let mut records = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let entity = cell(entity_col).to_string();
        let period = cell(period_col).to_string();
        if seen.insert((entity.clone(), period.clone()), row).is_some() {
            return Err(DprError::DuplicateObservation {
                entity,
                period,
                location: CellLocation {
                    row,
                    column: schema.period.clone(),
                },
            });
        }
        let mut features = Vec::with_capacity(feature_cols.len());
        for (i, name) in &feature_cols {
            let v = parse_cell(cell(*i), row, name)?;
            if v < 0.0 {
                return Err(DprError::NegativeValue {
                    value: v,
                    location: CellLocation {
                        row,
                        column: name.clone(),
                    },
                });
            }
            features.push(v);
        }
        let target = match target_col {
            Some(i) if !cell(i).is_empty() => {
                let name = schema.target.as_deref().unwrap_or_default();
                let v = parse_cell(cell(i), row, name)?;
                if v < 0.0 {
                    return Err(DprError::NegativeValue {
                        value: v,
                        location: CellLocation {
                            row,
                            column: name.to_string(),
                        },
                    });
                }
                Some(v)
            }
            _ => None,
        };
        records.push(RawRecord {
            entity,
            period,
            features,
            target,
        });
    }
    let names = feature_cols.into_iter().map(|(_, n)| n).collect();
    PanelDataset::from_records(names, records)
}

/// Writes the panel in the canonical layout read by [`load_panel`] with
/// the default schema: `entity,period,target,<features...>`. Missing
/// targets are written as empty cells.
pub fn write_panel<W: Write>(sink: W, data: &PanelDataset, delimiter: char) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter_byte(delimiter)?)
        .from_writer(sink);
    let mut header = vec!["entity".to_string(), "period".into(), "target".into()];
    header.extend(data.feature_names.iter().cloned());
    w.write_record(&header)?;
    for o in &data.observations {
        let mut row = vec![
            data.entities[o.entity].clone(),
            data.periods[o.period].clone(),
            o.target.map(num17).unwrap_or_default(),
        ];
        row.extend(o.features.iter().map(|&v| num17(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mass of CO2 per unit of each energy feature.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmissionFactorTable {
    pub factor_per_feature: BTreeMap<String, f64>,
}

impl EmissionFactorTable {
    /// Reads a two-column table `feature,factor` with a header row.
    pub fn load<R: Read>(source: R, delimiter: char) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter_byte(delimiter)?)
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader.headers()?.clone();
        let factor_col = header.get(1).unwrap_or("factor").to_string();
        let mut factor_per_feature = BTreeMap::new();
        for (idx, rec) in reader.records().enumerate() {
            let rec = rec?;
            let name = rec.get(0).unwrap_or("").to_string();
            let v = parse_cell(rec.get(1).unwrap_or(""), idx + 1, &factor_col)?;
            if v < 0.0 {
                return Err(DprError::NegativeValue {
                    value: v,
                    location: CellLocation {
                        row: idx + 1,
                        column: factor_col.clone(),
                    },
                });
            }
            factor_per_feature.insert(name, v);
        }
        Ok(EmissionFactorTable { factor_per_feature })
    }
}

/// Replaces every target with the factor-weighted sum of the features.
pub fn compute_emissions(data: &PanelDataset, factors: &EmissionFactorTable) -> Result<PanelDataset> {
    let weights: Vec<f64> = data
        .feature_names
        .iter()
        .map(|f| {
            factors
                .factor_per_feature
                .get(f)
                .copied()
                .ok_or_else(|| DprError::MissingFactor(f.clone()))
        })
        .collect::<Result<_>>()?;
    let observations = data
        .observations
        .iter()
        .map(|o| Observation {
            target: Some(o.features.iter().zip(&weights).map(|(x, w)| x * w).sum()),
            ..o.clone()
        })
        .collect();
    Ok(data.with_values(observations, data.log_offset))
}

/// How raw consumption values are rescaled before clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMode {
    /// Each row divided by its row sum.
    RawShares,
    /// Each column divided by the entity's maximum of that column over all
    /// of its periods.
    PerFeatureMax,
    /// Each row divided by its largest entry.
    RowMax,
    None,
}

impl std::str::FromStr for NormalizeMode {
    type Err = DprError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "rawshares" | "shares" => Ok(NormalizeMode::RawShares),
            "perfeaturemax" => Ok(NormalizeMode::PerFeatureMax),
            "rowmax" => Ok(NormalizeMode::RowMax),
            "none" => Ok(NormalizeMode::None),
            _ => Err(DprError::InvalidArgument(format!("unknown normalize mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSpec {
    pub log_offset: f64,
    pub normalize_mode: NormalizeMode,
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec {
            log_offset: 1.0,
            normalize_mode: NormalizeMode::RawShares,
        }
    }
}

/// Maps every feature and target value `v` to `ln(v + offset)`.
pub fn log_transform(data: &PanelDataset, spec: &TransformSpec) -> Result<PanelDataset> {
    let offset = spec.log_offset;
    if !(offset >= 0.0) || !offset.is_finite() {
        return Err(DprError::InvalidArgument(format!("log offset {offset} must be finite and >= 0")));
    }
    let check = |v: f64, o: &Observation| -> Result<f64> {
        let shifted = v + offset;
        if shifted > 0.0 {
            Ok(shifted.ln())
        } else {
            Err(DprError::NonPositiveLog {
                value: v,
                offset,
                entity: data.entities[o.entity].clone(),
                period: data.periods[o.period].clone(),
            })
        }
    };
    let observations = data
        .observations
        .iter()
        .map(|o| {
            let features = o.features.iter().map(|&v| check(v, o)).collect::<Result<Vec<_>>>()?;
            let target = o.target.map(|t| check(t, o)).transpose()?;
            Ok(Observation {
                features,
                target,
                ..o.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(data.with_values(observations, Some(offset)))
}

/// Inverse of the offset log transform for a single value.
pub fn inverse_log(v: f64, log_offset: f64) -> f64 {
    v.exp() - log_offset
}

/// Undoes [`log_transform`]; errors if the dataset was never transformed.
pub fn inverse_log_transform(data: &PanelDataset) -> Result<PanelDataset> {
    let offset = data
        .log_offset
        .ok_or_else(|| DprError::InvalidArgument("dataset is not log-transformed".into()))?;
    let observations = data
        .observations
        .iter()
        .map(|o| Observation {
            features: o.features.iter().map(|&v| inverse_log(v, offset)).collect(),
            target: o.target.map(|t| inverse_log(t, offset)),
            ..o.clone()
        })
        .collect();
    Ok(data.with_values(observations, None))
}

/// Clustering features plus the rows whose normalizer was zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMix {
    pub values: DMatrix<f64>,
    pub zero_rows: Vec<usize>,
}

pub fn energy_mix_features(data: &PanelDataset, mode: NormalizeMode) -> EnergyMix {
    let raw = data.feature_matrix();
    let (n, p) = raw.shape();
    let mut values = raw.clone();
    let mut zero_rows = Vec::new();
    match mode {
        NormalizeMode::None => {}
        NormalizeMode::RawShares | NormalizeMode::RowMax => {
            for i in 0..n {
                let row = raw.row(i);
                let denom = if mode == NormalizeMode::RawShares {
                    row.iter().sum::<f64>()
                } else {
                    row.iter().cloned().fold(0.0, f64::max)
                };
                if denom > 0.0 {
                    for j in 0..p {
                        values[(i, j)] = raw[(i, j)] / denom;
                    }
                } else {
                    values.row_mut(i).fill(0.0);
                    zero_rows.push(i);
                }
            }
        }
        NormalizeMode::PerFeatureMax => {
            let max = entity_feature_max(data);
            return per_feature_max_with(data, &max);
        }
    }
    EnergyMix { values, zero_rows }
}

/// Per-entity column maxima over all periods, keyed by entity label.
pub fn entity_feature_max(data: &PanelDataset) -> BTreeMap<String, Vec<f64>> {
    let mut max: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for o in &data.observations {
        let m = max
            .entry(data.entities[o.entity].clone())
            .or_insert_with(|| vec![0.0; data.feature_names.len()]);
        for (m, &v) in m.iter_mut().zip(&o.features) {
            *m = m.max(v);
        }
    }
    max
}

/// [`NormalizeMode::PerFeatureMax`] against fixed per-entity maxima, so rows
/// from later periods can be scaled like the rows the maxima came from.
/// Entities missing from `maxima` are scaled by their own maxima.
pub fn per_feature_max_with(data: &PanelDataset, maxima: &BTreeMap<String, Vec<f64>>) -> EnergyMix {
    let own = entity_feature_max(data);
    let p = data.feature_names.len();
    let mut values = DMatrix::zeros(data.len(), p);
    let mut zero_rows = Vec::new();
    for (i, o) in data.observations.iter().enumerate() {
        let label = &data.entities[o.entity];
        let max = maxima.get(label).unwrap_or(&own[label]);
        for j in 0..p {
            let m = max[j];
            values[(i, j)] = if m > 0.0 { o.features[j] / m } else { 0.0 };
        }
        if o.features.iter().all(|&v| v == 0.0) {
            zero_rows.push(i);
        }
    }
    EnergyMix { values, zero_rows }
}
