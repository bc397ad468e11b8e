use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use dpr_core::data_model::{PanelDataset, RawRecord};
use dpr_core::{DprError, Result};

/// Shape and ground truth of a synthetic panel. Entity `e` belongs to
/// cluster `e % n_clusters`; each row's feature shares are that cluster's
/// profile plus Gaussian jitter, scaled by an entity size that drifts over
/// periods. The target is `exp(eta) - log_offset` with
/// `eta = intercept + true_coefficients . ln(x + log_offset) + cluster_offsets[c] + noise`,
/// so the log-target is exactly linear in the log-features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_entities: usize,
    pub n_periods: usize,
    pub n_features: usize,
    pub n_clusters: usize,
    /// One share vector per cluster, each summing to 1.
    pub mix_profiles: Vec<Vec<f64>>,
    /// Standard deviation of the additive jitter on each share.
    #[serde(default)]
    pub share_spread: f64,
    pub true_coefficients: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
    /// Log-scale offset per cluster; empty means all zero.
    #[serde(default)]
    pub cluster_offsets: Vec<f64>,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "default_scale_mean")]
    pub scale_log_mean: f64,
    #[serde(default = "default_scale_sd")]
    pub scale_log_sd: f64,
    /// Per-period growth of the log scale.
    #[serde(default)]
    pub trend: f64,
    /// Per-row jitter of the log scale.
    #[serde(default)]
    pub row_scale_sd: f64,
    #[serde(default = "default_offset")]
    pub log_offset: f64,
    #[serde(default)]
    pub first_period: i64,
    pub seed: u64,
}

fn default_scale_mean() -> f64 {
    3.0
}

fn default_scale_sd() -> f64 {
    1.0
}

fn default_offset() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Planted cluster of every row, in dataset row order.
    pub labels: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub cluster_offsets: Vec<f64>,
    /// Noise-free log-target of every row.
    pub eta: Vec<f64>,
    /// Rows whose target would have been negative and was clipped to 0.
    pub clipped_rows: Vec<usize>,
}

/// Profiles where cluster `c` puts `dominance` extra share on feature
/// `c % n_features` (and, past `n_features` clusters, also on a second one).
pub fn dominant_profiles(n_clusters: usize, n_features: usize, dominance: f64) -> Vec<Vec<f64>> {
    (0..n_clusters)
        .map(|c| {
            let mut v = vec![(1.0 - dominance) / n_features as f64; n_features];
            let lead = c % n_features;
            if c < n_features {
                v[lead] += dominance;
            } else {
                let second = (lead + 1 + c / n_features) % n_features;
                v[lead] += dominance / 2.0;
                v[second] += dominance / 2.0;
            }
            v
        })
        .collect()
}

impl SyntheticSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SyntheticSpec = toml::from_str(text).map_err(|e| DprError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DprError::Config(format!("synthetic spec: {m}")));
        if self.n_entities == 0 || self.n_periods == 0 || self.n_features == 0 || self.n_clusters == 0 {
            return bad("sizes must be positive");
        }
        if self.mix_profiles.len() != self.n_clusters
            || self.mix_profiles.iter().any(|p| p.len() != self.n_features)
        {
            return bad("mix_profiles must be n_clusters vectors of n_features shares");
        }
        if self
            .mix_profiles
            .iter()
            .any(|p| p.iter().any(|&s| s < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9)
        {
            return bad("each mix profile must be non-negative and sum to 1");
        }
        if self.true_coefficients.len() != self.n_features {
            return bad("true_coefficients must have n_features entries");
        }
        if !self.cluster_offsets.is_empty() && self.cluster_offsets.len() != self.n_clusters {
            return bad("cluster_offsets must be empty or have n_clusters entries");
        }
        if self.noise_sd < 0.0 || self.share_spread < 0.0 || self.scale_log_sd < 0.0 || self.row_scale_sd < 0.0 {
            return bad("standard deviations must be >= 0");
        }
        if !(self.log_offset > 0.0) {
            return bad("log_offset must be > 0");
        }
        Ok(())
    }

    fn offsets(&self) -> Vec<f64> {
        if self.cluster_offsets.is_empty() {
            vec![0.0; self.n_clusters]
        } else {
            self.cluster_offsets.clone()
        }
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated standard deviation")
}

/// Draws the panel described by `spec`. Identical specs give identical
/// panels.
pub fn generate_panel(spec: &SyntheticSpec) -> Result<(PanelDataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offsets = spec.offsets();
    let width = spec.n_entities.saturating_sub(1).to_string().len();
    let pwidth = (spec.first_period + spec.n_periods as i64).to_string().len();
    let mut records = Vec::with_capacity(spec.n_entities * spec.n_periods);
    let mut labels = Vec::new();
    let mut eta_all = Vec::new();
    let mut clipped_rows = Vec::new();
    for e in 0..spec.n_entities {
        let c = e % spec.n_clusters;
        let base = spec.scale_log_mean + normal(spec.scale_log_sd).sample(&mut rng);
        for t in 0..spec.n_periods {
            let mut shares: Vec<f64> = spec.mix_profiles[c]
                .iter()
                .map(|&s| {
                    let j = if spec.share_spread > 0.0 {
                        normal(spec.share_spread).sample(&mut rng)
                    } else {
                        0.0
                    };
                    (s + j).max(0.0)
                })
                .collect();
            let total: f64 = shares.iter().sum();
            if total > 0.0 {
                shares.iter_mut().for_each(|s| *s /= total);
            } else {
                shares = spec.mix_profiles[c].clone();
            }
            let row_jitter = if spec.row_scale_sd > 0.0 {
                normal(spec.row_scale_sd).sample(&mut rng)
            } else {
                0.0
            };
            let scale = (base + spec.trend * t as f64 + row_jitter).exp();
            let features: Vec<f64> = shares.iter().map(|s| s * scale).collect();
            let eta = spec.intercept
                + offsets[c]
                + features
                    .iter()
                    .zip(&spec.true_coefficients)
                    .map(|(x, b)| b * (x + spec.log_offset).ln())
                    .sum::<f64>();
            let noise = if spec.noise_sd > 0.0 {
                normal(spec.noise_sd).sample(&mut rng)
            } else {
                0.0
            };
            let mut target = (eta + noise).exp() - spec.log_offset;
            if target < 0.0 {
                clipped_rows.push(records.len());
                target = 0.0;
            }
            records.push(RawRecord {
                entity: format!("E{e:0width$}"),
                period: format!("{:0pwidth$}", spec.first_period + t as i64),
                features,
                target: Some(target),
            });
            labels.push(c);
            eta_all.push(eta);
        }
    }
    let names = (0..spec.n_features).map(|j| format!("f{j:02}")).collect();
    let data = PanelDataset::from_records(names, records)?;
    Ok((
        data,
        GroundTruth {
            labels,
            coefficients: spec.true_coefficients.clone(),
            intercept: spec.intercept,
            cluster_offsets: offsets,
            eta: eta_all,
            clipped_rows,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            n_entities: 4,
            n_periods: 3,
            n_features: 3,
            n_clusters: 2,
            mix_profiles: dominant_profiles(2, 3, 0.6),
            share_spread: 0.01,
            true_coefficients: vec![0.5, 0.0, 0.2],
            intercept: 1.0,
            cluster_offsets: vec![0.0, 0.3],
            noise_sd: 0.0,
            scale_log_mean: 3.0,
            scale_log_sd: 1.0,
            trend: 0.05,
            row_scale_sd: 0.0,
            log_offset: 1.0,
            first_period: 2000,
            seed: 7,
        }
    }

    #[test]
    fn shapes_and_labels() {
        let (d, truth) = generate_panel(&spec()).unwrap();
        assert_eq!(d.len(), 12);
        assert_eq!(d.periods(), ["2000", "2001", "2002"]);
        assert_eq!(truth.labels, vec![0, 0, 0, 1, 1, 1, 0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn log_target_is_linear_without_noise() {
        let s = spec();
        let (d, truth) = generate_panel(&s).unwrap();
        for (o, eta) in d.observations().iter().zip(&truth.eta) {
            let y = (o.target.unwrap() + s.log_offset).ln();
            assert!((y - eta).abs() < 1e-12);
        }
    }

    #[test]
    fn profiles_sum_to_one() {
        for p in dominant_profiles(20, 16, 0.7) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_spec_is_rejected() {
        let mut s = spec();
        s.mix_profiles[0][0] += 0.5;
        assert!(generate_panel(&s).is_err());
    }
}
