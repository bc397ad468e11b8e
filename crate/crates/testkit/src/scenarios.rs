//! Ready-made synthetic specs used by the test suites.

use crate::synth::{dominant_profiles, SyntheticSpec};

/// Six clusters over six features whose profile centres are five times
/// further apart than the typical distance of a row from its centre.
pub fn six_cluster_spec(seed: u64) -> SyntheticSpec {
    let p = 6;
    let dominance = 0.5;
    // Centres differ by `dominance * sqrt(2)`; the jitter radius is about
    // `share_spread * sqrt(p)`.
    let centre_gap = dominance * 2f64.sqrt();
    let share_spread = centre_gap / 5.0 / (p as f64).sqrt();
    SyntheticSpec {
        n_entities: 30,
        n_periods: 10,
        n_features: p,
        n_clusters: 6,
        mix_profiles: dominant_profiles(6, p, dominance),
        share_spread,
        true_coefficients: vec![0.6, 0.0, 0.3, 0.0, 0.0, 0.1],
        intercept: 1.0,
        cluster_offsets: vec![0.0, 0.5, -0.4, 0.9, 0.2, -0.7],
        noise_sd: 0.002,
        scale_log_mean: 4.0,
        scale_log_sd: 1.0,
        trend: 0.03,
        row_scale_sd: 0.05,
        log_offset: 1.0,
        first_period: 2000,
        seed,
    }
}

/// The 46-entity, 20-period, 16-feature shape with 16 planted clusters.
/// All features share the entity scale, so the log-features are strongly
/// collinear. Only two features and three cluster offsets carry signal;
/// cluster 0, which holds the first entity, has a zero offset. The planted
/// clusters separate cleanly at `COLLINEAR_EPS`.
pub fn collinear_spec(seed: u64) -> SyntheticSpec {
    let p = 16;
    let mut beta = vec![0.0; p];
    beta[0] = 0.5;
    beta[3] = 0.3;
    let mut offsets = vec![0.0; 16];
    offsets[5] = 0.4;
    offsets[9] = -0.3;
    offsets[12] = 0.2;
    SyntheticSpec {
        n_entities: 46,
        n_periods: 20,
        n_features: p,
        n_clusters: 16,
        mix_profiles: dominant_profiles(16, p, 0.6),
        share_spread: 0.02,
        true_coefficients: beta,
        intercept: 2.0,
        cluster_offsets: offsets,
        noise_sd: 0.02,
        scale_log_mean: 5.0,
        scale_log_sd: 3.0,
        trend: 0.04,
        row_scale_sd: 0.02,
        log_offset: 1.0,
        first_period: 2000,
        seed,
    }
}

/// DBSCAN radius that recovers the planted clusters of `collinear_spec`.
pub const COLLINEAR_EPS: f64 = 0.25;
