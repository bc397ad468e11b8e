use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dpr");

fn dpr(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dpr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fields(line: &str) -> BTreeMap<String, String> {
    line.split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn six_cluster_panel(dir: &Path) -> PathBuf {
    let p = dir.join("six.csv");
    ok(&["synth", "--scenario", "six-cluster", "--seed", "3", "--out", s(&p)]);
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn run_on_synthetic_panel_populates_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = six_cluster_panel(tmp.path());
    let out = tmp.path().join("run");
    let line = ok(&["--eps", "0.3", "run", "--input", s(&panel), "--out", s(&out)]);
    let f = fields(&line);
    assert_eq!(f["k"], "6");
    assert!(f["test_r2"].parse::<f64>().unwrap() > 0.999);
    let names: Vec<String> = files(&out).into_keys().collect();
    for want in [
        "clusters.csv",
        "coefficients.csv",
        "config.toml",
        "cv_table.csv",
        "fit_scatter.csv",
        "fitted.csv",
        "forecast.csv",
        "k_distance.csv",
        "model.txt",
        "path_trajectories.csv",
        "summary.json",
        "test_clusters.csv",
    ] {
        assert!(names.iter().any(|n| n == want), "missing {want}");
    }
    assert_eq!(line.lines().count(), 1);
}

#[test]
fn missing_input_exits_one_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let r = dpr(&["run", "--input", s(&tmp.path().join("absent.csv")), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(r.stdout.is_empty());
    assert!(!String::from_utf8_lossy(&r.stderr).is_empty());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(dpr(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(dpr(&["fit", "--input", "x.csv"]).status.code(), Some(1));
    assert_eq!(dpr(&["--help"]).status.code(), Some(0));
}

#[test]
fn unregularized_ridge_on_duplicate_columns_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = tmp.path().join("dup.csv");
    let mut text = String::from("entity,period,target,a,b,c\n");
    for e in 0..6 {
        for t in 0..8 {
            let a = 10.0 + e as f64 * 3.0 + t as f64;
            let c = 5.0 + ((e * 7 + t * 3) % 5) as f64;
            text += &format!("E{e},{},{},{a},{a},{c}\n", 2000 + t, 2.0 * a + c);
        }
    }
    fs::write(&panel, text).unwrap();
    let out = tmp.path().join("fit");
    let args = ["--kind", "ridge", "--eps", "1", "fit", "--input", s(&panel), "--out", s(&out), "--lambda"];
    let r = dpr(&[&args[..], &["0"]].concat());
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!out.exists());
    ok(&[&args[..], &["0.1"]].concat());
}

#[test]
fn reruns_and_thread_counts_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = six_cluster_panel(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&["--threads", "1", "--eps", "0.3", "run", "--input", s(&panel), "--out", s(&a)]);
    ok(&["--threads", "4", "--eps", "0.3", "run", "--input", s(&panel), "--out", s(&b)]);
    assert_eq!(files(&a), files(&b));
    ok(&["--eps", "0.3", "run", "--input", s(&panel), "--out", s(&a)]);
    assert_eq!(files(&a), files(&b));

    let p2 = tmp.path().join("six2.csv");
    ok(&["synth", "--scenario", "six-cluster", "--seed", "3", "--out", s(&p2)]);
    assert_eq!(fs::read(&panel).unwrap(), fs::read(&p2).unwrap());
}

#[test]
fn staged_commands_compose_to_run() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = six_cluster_panel(tmp.path());
    let config = tmp.path().join("dpr.toml");
    fs::write(
        &config,
        "[clustering]\neps = 0.3\nmin_pts = 4\n[regression]\nkind = \"elastic_net\"\nalpha_grid = [0.5, 1.0]\n[split]\ntest_periods = 3\ncv_folds = 4\n",
    )
    .unwrap();
    let cfg = ["--config", s(&config)];
    let dir = |n: &str| tmp.path().join(n);
    let input = ["--input", s(&panel)];

    ok(&[&cfg[..], &["run"], &input[..], &["--out", s(&dir("run"))]].concat());
    ok(&[&cfg[..], &["cluster"], &input[..], &["--out", s(&dir("cluster"))]].concat());
    let cv = fields(&ok(&[&cfg[..], &["cv"], &input[..], &["--out", s(&dir("cv"))]].concat()));
    let (lambda, alpha) = (cv["best_lambda"].as_str(), cv["best_alpha"].as_str());
    ok(&[&cfg[..], &["fit"], &input[..], &["--out", s(&dir("fit")), "--lambda", lambda, "--alpha", alpha]].concat());
    ok(&[&cfg[..], &["path"], &input[..], &["--out", s(&dir("path")), "--alpha", alpha]].concat());
    let model = dir("fit").join("model.txt");
    ok(&["forecast", "--model", s(&model), "--input", s(&panel), "--last-periods", "3", "--out", s(&dir("fc"))]);

    let run = files(&dir("run"));
    let staged = [
        ("cluster", "clusters.csv"),
        ("cluster", "k_distance.csv"),
        ("cv", "cv_table.csv"),
        ("fit", "coefficients.csv"),
        ("fit", "fitted.csv"),
        ("fit", "model.txt"),
        ("path", "path_trajectories.csv"),
        ("fc", "forecast.csv"),
        ("fc", "test_clusters.csv"),
    ];
    for (d, name) in staged {
        assert_eq!(fs::read(dir(d).join(name)).unwrap(), run[name], "{d}/{name}");
    }
}

#[test]
fn plot_data_is_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = six_cluster_panel(tmp.path());
    let out = tmp.path().join("run");
    ok(&["--eps", "0.3", "--kind", "lasso", "run", "--input", s(&panel), "--out", s(&out)]);

    let scatter = csv_rows(&out.join("fit_scatter.csv"));
    assert_eq!(scatter.len(), 300);

    let coefs = csv_rows(&out.join("coefficients.csv"));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let lambda: f64 = summary["penalty"]["lambda"].to_string().parse().unwrap();
    let mut path = csv::Reader::from_path(out.join("path_trajectories.csv")).unwrap();
    let header: Vec<String> = path.headers().unwrap().iter().map(String::from).collect();
    let row = path
        .records()
        .map(|r| r.unwrap())
        .find(|r| r[0].parse::<f64>().unwrap() == lambda)
        .expect("chosen lambda is on the path");
    for (j, name) in header.iter().enumerate().skip(1) {
        let c = coefs.iter().find(|c| &c[0] == name).expect("column in coefficients");
        let (a, b): (f64, f64) = (row[j].parse().unwrap(), c[4].parse().unwrap());
        assert!((a - b).abs() < 1e-6, "{name}: {a} vs {b}");
    }

    let one = tmp.path().join("one");
    ok(&["--eps", "0.3", "--kind", "lasso", "--lambda-grid", "0.01", "path", "--input", s(&panel), "--out", s(&one)]);
    let text = fs::read_to_string(one.join("path_trajectories.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn scan_suggests_the_best_silhouette() {
    let tmp = tempfile::tempdir().unwrap();
    let panel = six_cluster_panel(tmp.path());
    let out = tmp.path().join("scan");
    let line = ok(&[
        "--eps-grid", "0.05,0.1,0.2,0.3,0.4", "--minpts-grid", "3,5", "--test-periods", "0",
        "scan", "--input", s(&panel), "--out", s(&out),
    ]);
    let f = fields(&line);
    assert_eq!(f["cells"], "10");
    assert_eq!(f["k"], "6");
    assert_eq!(csv_rows(&out.join("scan.csv")).len(), 10);
}

#[test]
fn ingest_maps_columns_and_computes_emissions() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw.tsv");
    fs::write(&raw, "year\tindustry\tcoal\tgas\tco2\n2001\tsteel\t2\t3\t99\n2000\tsteel\t1\t4\t99\n2000\tpaper\t5\t0\t99\n").unwrap();
    let factors = tmp.path().join("factors.tsv");
    fs::write(&factors, "feature\tfactor\ncoal\t2.5\ngas\t1.5\n").unwrap();
    let out = tmp.path().join("panel.csv");
    let line = ok(&[
        "ingest", "--input", s(&raw), "--out", s(&out), "--entity-col", "industry", "--period-col", "year",
        "--target-col", "co2", "--features", "coal,gas", "--delimiter", "\t", "--factors", s(&factors),
    ]);
    assert_eq!(fields(&line)["rows"], "3");
    let rows = csv_rows(&out);
    let targets: Vec<(String, String, f64)> =
        rows.iter().map(|r| (r[0].clone(), r[1].clone(), r[2].parse().unwrap())).collect();
    assert_eq!(
        targets,
        vec![
            ("paper".into(), "2000".into(), 12.5),
            ("steel".into(), "2000".into(), 8.5),
            ("steel".into(), "2001".into(), 9.5),
        ]
    );
    let bad = dpr(&["ingest", "--input", s(&raw), "--out", s(&tmp.path().join("x.csv"))]);
    assert_eq!(bad.status.code(), Some(1));
}
