use std::fs;
use std::io::BufReader;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpr_core::data_model::{PanelDataset, RawRecord};
use dpr_core::penalized::{metrics, PenaltyKind};
use dpr_core::pipeline::{chronological_split, run_dpr, train_stage, DprConfig, ModelBundle, SplitSpec};
use dpr_core::report::{write_run_report, write_training, TRAINING_FILES};

const PROFILES: [[f64; 3]; 3] = [[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7]];

/// Twelve entities in three mix groups over ten periods, with a log-linear
/// target and a per-group offset.
fn panel(seed: u64) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for e in 0..12 {
        let g = e % 3;
        let base: f64 = rng.random_range(3.0..6.0);
        for t in 0..10 {
            let shares: Vec<f64> = PROFILES[g].iter().map(|s| s + rng.random_range(-0.02..0.02)).collect();
            let scale = (base + 0.05 * t as f64).exp();
            let features: Vec<f64> = shares.iter().map(|s| s * scale).collect();
            let eta = 0.5 + 0.6 * (features[0] + 1.0).ln() + 0.3 * (features[2] + 1.0).ln()
                + [0.0, 0.4, -0.3][g]
                + rng.random_range(-0.01..0.01);
            records.push(RawRecord {
                entity: format!("E{e:02}"),
                period: format!("{}", 2000 + t),
                features,
                target: Some(eta.exp() - 1.0),
            });
        }
    }
    PanelDataset::from_records(vec!["coal".into(), "gas".into(), "oil".into()], records).unwrap()
}

fn config() -> DprConfig {
    let mut c = DprConfig::default();
    c.clustering.eps = 0.15;
    c.clustering.min_pts = 4;
    c.split.test_periods = 3;
    c.split.holdout_periods = 2;
    c.clustering.refit_full = true;
    c
}

fn split(data: &PanelDataset) -> SplitSpec {
    SplitSpec::last_periods(data.periods(), 3, 5).unwrap()
}

fn read_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn run_recovers_groups_and_forecasts() {
    let data = panel(1);
    let report = run_dpr(&data, &config(), Some(&split(&data))).unwrap();
    assert_eq!(report.train.clusters.model.k, 3);
    assert_eq!(report.train.clusters.model.noise_count(), 0);
    let test = report.test.as_ref().unwrap();
    assert_eq!(test.forecast.rows.len(), 36);
    assert!(test.metrics.as_ref().unwrap().r2.unwrap() > 0.99);
    assert!(report.train.holdout_metrics.is_some());
    assert_eq!(report.full_clusters.as_ref().unwrap().1.labels.len(), data.len());
}

#[test]
fn deleting_test_rows_changes_no_training_file() {
    let data = panel(2);
    let s = split(&data);
    let (train, _) = chronological_split(&data, &s).unwrap();
    let full = run_dpr(&data, &config(), Some(&s)).unwrap();
    let alone = train_stage(&train, &config()).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_training(a.path(), &full.train).unwrap();
    write_training(b.path(), &alone).unwrap();
    for name in TRAINING_FILES {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn reruns_are_byte_identical() {
    let data = panel(3);
    let root = tempfile::tempdir().unwrap();
    let (x, y) = (root.path().join("x"), root.path().join("y"));
    write_run_report(&x, &run_dpr(&data, &config(), Some(&split(&data))).unwrap()).unwrap();
    write_run_report(&y, &run_dpr(&data, &config(), Some(&split(&data))).unwrap()).unwrap();
    assert_eq!(read_dir(&x), read_dir(&y));
    assert!(read_dir(&x).iter().any(|(n, _)| n == "forecast.csv"));
}

#[test]
fn summary_metrics_match_the_fitted_table() {
    let data = panel(4);
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("run");
    write_run_report(&out, &run_dpr(&data, &config(), Some(&split(&data))).unwrap()).unwrap();
    let mut reader = csv::Reader::from_path(out.join("fitted.csv")).unwrap();
    let (mut y, mut f) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.unwrap();
        y.push(rec[2].parse::<f64>().unwrap());
        f.push(rec[3].parse::<f64>().unwrap());
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let train = &summary["train"];
    let mse: f64 = train["mse"].to_string().parse().unwrap();
    let r2: f64 = train["r2"].to_string().parse().unwrap();
    assert!((metrics::mse(&y, &f).unwrap() - mse).abs() < 1e-10);
    assert!((metrics::r2(&y, &f).unwrap() - r2).abs() < 1e-10);
    assert_eq!(train["rows"], y.len());
}

#[test]
fn bundle_round_trips_through_text() {
    let data = panel(5);
    let s = split(&data);
    let report = run_dpr(&data, &config(), Some(&s)).unwrap();
    let bundle = &report.train.bundle;
    let mut text = Vec::new();
    bundle.write(&mut text).unwrap();
    let back = ModelBundle::read(BufReader::new(&text[..])).unwrap();
    assert_eq!(&back, bundle);
    let mut again = Vec::new();
    back.write(&mut again).unwrap();
    assert_eq!(text, again);
    let (_, test) = chronological_split(&data, &s).unwrap();
    assert_eq!(back.predict(&test).unwrap(), bundle.predict(&test).unwrap());
}

#[test]
fn constant_single_entity_gives_intercept_only_model() {
    let records = (0..8)
        .map(|t| RawRecord {
            entity: "only".into(),
            period: format!("{}", 2010 + t),
            features: vec![10.0 + t as f64, 5.0],
            target: Some(20.0),
        })
        .collect();
    let data = PanelDataset::from_records(vec!["a".into(), "b".into()], records).unwrap();
    let mut c = DprConfig::default();
    c.split.test_periods = 0;
    c.split.cv_folds = 2;
    c.regression.kind = PenaltyKind::Lasso;
    let t = train_stage(&data, &c).unwrap();
    assert!(t.model.coefficients.iter().all(|&b| b == 0.0));
    assert_eq!(t.train_metrics.mse, 0.0);
    assert!((t.model.intercept - 21f64.ln()).abs() < 1e-12);
}

#[test]
fn stage_errors_name_the_stage() {
    let data = panel(6);
    let mut c = config();
    c.split.holdout_periods = 50;
    let err = run_dpr(&data, &c, Some(&split(&data))).unwrap_err();
    assert!(err.to_string().contains("holdout"), "{err}");
}
