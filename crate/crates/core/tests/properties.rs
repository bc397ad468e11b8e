use nalgebra::DMatrix;
use proptest::prelude::*;

use dpr_core::clustering::{canonicalize, dbscan, silhouette_sc, sse, DbscanParams, Label};
use dpr_core::data_model::{
    compute_emissions, energy_mix_features, inverse_log_transform, log_transform, EmissionFactorTable,
    NormalizeMode, PanelDataset, RawRecord, TransformSpec,
};
use dpr_core::penalized::{self, fit_elastic_net, fit_ridge, regularization_path, CdOptions, PenaltyKind};
use dpr_core::pipeline::{augment_with_dummies, OutlierPolicy};

fn panel(rows: &[Vec<f64>]) -> PanelDataset {
    let names = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
    let records = rows
        .iter()
        .enumerate()
        .map(|(i, r)| RawRecord {
            entity: format!("e{i:03}"),
            period: "2000".into(),
            features: r.clone(),
            target: Some(r.iter().sum::<f64>() + 1.0),
        })
        .collect();
    PanelDataset::from_records(names, records).unwrap()
}

fn positive_rows() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..5).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(0.01f64..1e4, d), 1..20))
}

fn points() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..4).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), 2..30))
}

fn matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

fn regression() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (10usize..40, 2usize..6).prop_flat_map(|(n, p)| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, p), n),
            prop::collection::vec(-5.0f64..5.0, n),
        )
    })
}

fn design(x: &[Vec<f64>], y: &[f64]) -> penalized::DesignMatrix {
    let names = (0..x[0].len()).map(|j| format!("x{j}")).collect();
    penalized::standardize(&matrix(x), y, names).unwrap()
}

/// Relabels clusters by first occurrence in `order`, so partitions of
/// permuted inputs can be compared row by row.
fn relabel_in(labels: &[Label], order: &[usize]) -> Vec<Label> {
    let picked: Vec<Label> = order.iter().map(|&i| labels[i]).collect();
    canonicalize(&picked).0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raw_shares_sum_to_one(rows in positive_rows()) {
        let mix = energy_mix_features(&panel(&rows), NormalizeMode::RawShares);
        for i in 0..mix.values.nrows() {
            let s: f64 = mix.values.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn raw_shares_ignore_row_scale(rows in positive_rows(), c in 0.001f64..1000.0) {
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let a = energy_mix_features(&panel(&rows), NormalizeMode::RawShares).values;
        let b = energy_mix_features(&panel(&scaled), NormalizeMode::RawShares).values;
        prop_assert!((a - b).amax() < 1e-12);
    }

    #[test]
    fn log_transform_round_trips(rows in positive_rows(), offset in 0.0f64..5.0) {
        let data = panel(&rows);
        let spec = TransformSpec { log_offset: offset, ..TransformSpec::default() };
        let back = inverse_log_transform(&log_transform(&data, &spec).unwrap()).unwrap();
        for (a, b) in data.observations().iter().zip(back.observations()) {
            for (x, y) in a.features.iter().zip(&b.features) {
                prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn emissions_are_linear_in_consumption(rows in positive_rows(), c in 0.1f64..10.0) {
        let d = rows[0].len();
        let factors = EmissionFactorTable {
            factor_per_feature: (0..d).map(|j| (format!("f{j}"), 0.5 + j as f64)).collect(),
        };
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let a = compute_emissions(&panel(&rows), &factors).unwrap();
        let b = compute_emissions(&panel(&scaled), &factors).unwrap();
        for (x, y) in a.observations().iter().zip(b.observations()) {
            let (x, y) = (x.target.unwrap(), y.target.unwrap());
            prop_assert!((x * c - y).abs() <= 1e-10 * y.abs().max(1.0));
        }
    }

    #[test]
    fn dbscan_core_partition_ignores_row_order(pts in points(), eps in 0.1f64..1.5, min_pts in 1usize..5, seed in any::<u64>()) {
        let n = pts.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted: Vec<Vec<f64>> = order.iter().map(|&i| pts[i].clone()).collect();
        let params = DbscanParams::new(eps, min_pts).unwrap();
        let a = dbscan(&matrix(&pts), &params).unwrap();
        let b = dbscan(&matrix(&permuted), &params).unwrap();
        prop_assert_eq!(a.k, b.k);
        let core_a: Vec<usize> = order.iter().copied().filter(|&i| a.core[i]).collect();
        let core_b: Vec<usize> = (0..n).filter(|&i| b.core[i]).collect();
        prop_assert_eq!(core_a.len(), core_b.len());
        prop_assert_eq!(relabel_in(&a.labels, &core_a), relabel_in(&b.labels, &core_b));
        let noise_a: Vec<bool> = order.iter().map(|&i| a.labels[i].is_none()).collect();
        let noise_b: Vec<bool> = b.labels.iter().map(|l| l.is_none()).collect();
        prop_assert_eq!(noise_a, noise_b);
    }

    #[test]
    fn distant_point_is_noise(pts in points(), eps in 0.1f64..1.0, min_pts in 2usize..5) {
        let mut with_far = pts.clone();
        with_far.push(vec![100.0; pts[0].len()]);
        let params = DbscanParams::new(eps, min_pts).unwrap();
        let a = dbscan(&matrix(&pts), &params).unwrap();
        let b = dbscan(&matrix(&with_far), &params).unwrap();
        prop_assert_eq!(b.labels.last().copied().flatten(), None);
        prop_assert_eq!(&b.labels[..pts.len()], &a.labels[..]);
    }

    #[test]
    fn silhouette_is_bounded(pts in points(), eps in 0.1f64..1.5, min_pts in 1usize..4) {
        let m = matrix(&pts);
        let model = dbscan(&m, &DbscanParams::new(eps, min_pts).unwrap()).unwrap();
        if let Ok(sc) = silhouette_sc(&m, &model.labels) {
            prop_assert!((-1.0..=1.0).contains(&sc));
        }
    }

    #[test]
    fn splitting_a_cluster_never_raises_sse(pts in points(), cut in 0usize..30) {
        let m = matrix(&pts);
        let one: Vec<Label> = vec![Some(0); pts.len()];
        let two: Vec<Label> = (0..pts.len()).map(|i| Some(usize::from(i < cut % pts.len()))).collect();
        prop_assert!(sse(&m, &two) <= sse(&m, &one) + 1e-9);
    }

    #[test]
    fn fits_are_invariant_to_column_scale((x, y) in regression(), c in 0.01f64..100.0, lambda in 0.001f64..1.0) {
        let scaled: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * c).collect()).collect();
        let opts = CdOptions { tol: 1e-12, max_iter: 100_000 };
        let a = fit_elastic_net(&design(&x, &y), lambda, 0.5, &opts).unwrap();
        let b = fit_elastic_net(&design(&scaled, &y), lambda, 0.5, &opts).unwrap();
        for (u, v) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((u - v).abs() < 1e-8);
        }
        for (u, v) in a.raw_coefficients.iter().zip(&b.raw_coefficients) {
            prop_assert!((u - v * c).abs() < 1e-8 * u.abs().max(1.0));
        }
    }

    #[test]
    fn warm_path_matches_cold_fits((x, y) in regression(), alpha in 0.0f64..=1.0) {
        let dm = design(&x, &y);
        let opts = CdOptions { tol: 1e-13, max_iter: 200_000 };
        let top = penalized::lambda_max(&dm, alpha.max(0.01));
        let grid = penalized::log_grid(top, 1e-3, 8);
        let path = regularization_path(&dm, &grid, PenaltyKind::ElasticNet, alpha, &opts).unwrap();
        for (m, &lambda) in path.iter().zip(&grid) {
            let cold = fit_elastic_net(&dm, lambda, alpha, &opts).unwrap();
            for (u, v) in m.coefficients.iter().zip(&cold.coefficients) {
                prop_assert!((u - v).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn identical_columns_share_weight() {
    let x: Vec<Vec<f64>> = (0..40)
        .map(|i| {
            let t = (i as f64 * 0.37).sin();
            vec![t, t, (i as f64 * 1.3).cos()]
        })
        .collect();
    let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - r[2] + 0.1).collect();
    let opts = CdOptions { tol: 1e-13, max_iter: 200_000 };
    for alpha in [0.0, 0.3, 0.9] {
        let m = fit_elastic_net(&design(&x, &y), 0.01, alpha, &opts).unwrap();
        assert!((m.coefficients[0] - m.coefficients[1]).abs() < 1e-7, "{alpha}: {:?}", m.coefficients);
        assert!(m.coefficients[0] > 0.0);
    }
}

#[test]
fn baseline_choice_leaves_fitted_values_unchanged() {
    let n = 60;
    let labels: Vec<Label> = (0..n).map(|i| if i == 7 { None } else { Some(i % 3) }).collect();
    let x: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 0.19).cos()]).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| x[i][0] - 0.5 * x[i][1] + [0.0, 1.0, -0.7][i % 3] + 0.01 * (i as f64 * 2.1).sin())
        .collect();
    let dm = design(&x, &y);
    let fitted = |baseline, lambda| {
        let aug = augment_with_dummies(&dm, &labels, 3, OutlierPolicy::UniqueDummy, baseline).unwrap();
        let m = fit_ridge(&aug.design, lambda).unwrap();
        (m.coefficients.clone(), m.predict_standardized(&aug.design.x).unwrap())
    };
    let gap = |lambda| {
        let (b0, f0) = fitted(0, lambda);
        let (b2, f2) = fitted(2, lambda);
        assert!(b0.iter().zip(&b2).any(|(u, v)| (u - v).abs() > 1e-3));
        f0.iter().zip(&f2).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
    };
    assert!(gap(0.0) < 1e-10);
    assert!(gap(1e-8) < 1e-6);
    // The penalty is not invariant under the change of baseline, so a
    // visible penalty moves the fit.
    assert!(gap(0.05) > 1e-3);
}
