use dpr_core::clustering::{dbscan, DbscanParams};
use dpr_core::data_model::{energy_mix_features, write_panel, NormalizeMode};
use dpr_core::penalized::PenaltyKind;
use dpr_core::pipeline::{run_dpr, train_stage, DprConfig};
use dpr_testkit::scenarios::six_cluster_spec;
use dpr_testkit::{adjusted_rand_index, dominant_profiles, generate_panel, noise_as_singletons, SyntheticSpec};

fn panel_bytes(spec: &SyntheticSpec) -> Vec<u8> {
    let (data, _) = generate_panel(spec).unwrap();
    let mut out = Vec::new();
    write_panel(&mut out, &data, ',').unwrap();
    out
}

#[test]
fn fixed_seed_gives_identical_bytes() {
    let spec = six_cluster_spec(11);
    assert_eq!(panel_bytes(&spec), panel_bytes(&spec));
    assert_ne!(panel_bytes(&spec), panel_bytes(&six_cluster_spec(12)));
}

#[test]
fn six_separated_clusters_are_recovered_exactly() {
    let spec = six_cluster_spec(3);
    let (data, truth) = generate_panel(&spec).unwrap();
    let mix = energy_mix_features(&data, NormalizeMode::RawShares);
    let model = dbscan(&mix.values, &DbscanParams::new(0.3, 4).unwrap()).unwrap();
    assert_eq!(model.k, 6);
    assert_eq!(adjusted_rand_index(&noise_as_singletons(&model.labels), &truth.labels), 1.0);
}

#[test]
fn noiseless_single_coefficient_is_recovered() {
    let spec = SyntheticSpec {
        n_entities: 8,
        n_periods: 12,
        n_features: 3,
        n_clusters: 1,
        mix_profiles: vec![vec![0.5, 0.3, 0.2]],
        share_spread: 0.05,
        true_coefficients: vec![0.0, 0.7, 0.0],
        intercept: 0.4,
        cluster_offsets: vec![],
        noise_sd: 0.0,
        scale_log_mean: 4.0,
        scale_log_sd: 1.0,
        trend: 0.02,
        row_scale_sd: 0.1,
        log_offset: 1.0,
        first_period: 2000,
        seed: 5,
    };
    let (data, _) = generate_panel(&spec).unwrap();
    let mut config = DprConfig::default();
    config.regression.kind = PenaltyKind::Lasso;
    config.regression.lambda_grid = vec![1e-12];
    config.regression.tol = 1e-13;
    config.split.test_periods = 0;
    let train = train_stage(&data, &config).unwrap();
    assert_eq!(train.clusters.model.k, 1);
    let b = &train.model.raw_coefficients;
    assert!((b[1] - 0.7).abs() < 1e-6, "{b:?}");
    assert!(b[0].abs() < 1e-6 && b[2].abs() < 1e-6, "{b:?}");
    assert!((train.model.raw_intercept - 0.4).abs() < 1e-5);
}

/// Sixteen features of which seven drive the target, one planted cluster.
fn seven_of_sixteen_spec(seed: u64) -> SyntheticSpec {
    let mut beta = vec![0.0; 16];
    for (j, b) in [(0, 0.45), (2, -0.3), (4, 0.35), (6, 0.25), (9, -0.2), (11, 0.3), (14, 0.4)] {
        beta[j] = b;
    }
    SyntheticSpec {
        n_entities: 46,
        n_periods: 20,
        n_features: 16,
        n_clusters: 1,
        mix_profiles: dominant_profiles(1, 16, 0.0),
        share_spread: 0.01,
        true_coefficients: beta,
        intercept: 1.0,
        cluster_offsets: vec![],
        noise_sd: 0.001,
        scale_log_mean: 5.0,
        scale_log_sd: 3.0,
        trend: 0.03,
        row_scale_sd: 0.01,
        log_offset: 1.0,
        first_period: 2000,
        seed,
    }
}

#[test]
fn lasso_recovers_the_sparse_support() {
    for seed in [1, 4] {
        check_support(seed);
    }
}

fn check_support(seed: u64) {
    let spec = seven_of_sixteen_spec(seed);
    let (data, _) = generate_panel(&spec).unwrap();
    let mut config = DprConfig::default();
    config.regression.kind = PenaltyKind::Lasso;
    config.clustering.eps = 5.0;
    let split = dpr_core::pipeline::configured_split(&data, &config).unwrap();
    let report = run_dpr(&data, &config, split.as_ref()).unwrap();
    let model = &report.train.model;
    assert_eq!(report.train.clusters.model.k, 1);
    let support: Vec<usize> = (0..16).filter(|&j| model.coefficients[j] != 0.0).collect();
    let truth: Vec<usize> = (0..16).filter(|&j| spec.true_coefficients[j] != 0.0).collect();
    assert_eq!(support, truth);
    assert_eq!(model.sparsity(), 0.4375);
}
