use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dpr_core::clustering::{best_scan_row, scan_params, Label};
use dpr_core::data_model::{
    compute_emissions, load_panel, write_panel, EmissionFactorTable, PanelDataset, PanelSchema,
};
use dpr_core::fmt::num17;
use dpr_core::penalized::{self, PenaltySpec};
use dpr_core::pipeline::{
    chronological_split, cluster_stage, configured_split, cross_validate, design_stage, fit_stage, fold_assignment,
    lambda_grid, run_dpr, test_stage, DprConfig, ModelBundle, PathPoint,
};
use dpr_core::report::{
    self, jnum, metrics_json, write_dir_atomic, write_file_atomic, write_json, write_run_report,
};
use dpr_core::{DprError, Result};
use dpr_testkit::{generate_panel, scenarios, SyntheticSpec};

#[derive(Parser)]
#[command(name = "dpr", version, about = "Cluster panel rows by feature mix, then fit penalized log-linear models")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Each one overrides the matching key
/// of the config file.
#[derive(Args)]
struct Global {
    /// TOML config with [transform], [clustering], [regression] and [split] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for cross-validation and parameter scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Count a point as core only with more than min-pts neighbours.
    #[arg(long, global = true)]
    core_strict: bool,
    /// Also cluster every row, test periods included.
    #[arg(long, global = true)]
    refit_clusters_full: bool,
    /// DBSCAN neighbourhood radius.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Neighbours needed for a core point.
    #[arg(long, global = true)]
    min_pts: Option<usize>,
    /// Comma-separated eps values for scan.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
    /// Comma-separated min-pts values for scan.
    #[arg(long, global = true, value_delimiter = ',')]
    minpts_grid: Option<Vec<usize>>,
    /// Constant added before taking logs.
    #[arg(long, global = true)]
    log_offset: Option<f64>,
    /// raw_shares, per_feature_max, row_max or none.
    #[arg(long, global = true)]
    normalize: Option<String>,
    /// unique_dummy or exclude.
    #[arg(long, global = true)]
    outlier_policy: Option<String>,
    /// Cluster left without a dummy column.
    #[arg(long, global = true)]
    baseline_cluster: Option<usize>,
    /// Penalty family.
    #[arg(long, global = true)]
    kind: Option<Kind>,
    /// Comma-separated lambda values; replaces the automatic grid.
    #[arg(long, global = true, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Comma-separated elastic-net mixing values.
    #[arg(long, global = true, value_delimiter = ',')]
    alpha_grid: Option<Vec<f64>>,
    /// Coordinate-descent tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Coordinate-descent sweep limit.
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Trailing periods held out for forecasting; 0 trains on all periods.
    #[arg(long, global = true)]
    test_periods: Option<usize>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// rows or periods.
    #[arg(long, global = true)]
    fold_shape: Option<String>,
    /// Trailing training periods reported as a validation holdout.
    #[arg(long, global = true)]
    holdout_periods: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ridge,
    Lasso,
    ElasticNet,
}

impl Kind {
    fn penalty_kind(self) -> penalized::PenaltyKind {
        match self {
            Kind::Ridge => penalized::PenaltyKind::Ridge,
            Kind::Lasso => penalized::PenaltyKind::Lasso,
            Kind::ElasticNet => penalized::PenaltyKind::ElasticNet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    SixCluster,
    Collinear,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a delimited table into the canonical panel file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML column mapping (entity, period, target, features, delimiter).
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        entity_col: Option<String>,
        #[arg(long)]
        period_col: Option<String>,
        #[arg(long)]
        target_col: Option<String>,
        /// Read no target column.
        #[arg(long)]
        no_target: bool,
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        #[arg(long)]
        delimiter: Option<char>,
        /// Two-column (feature, factor) table in the input delimiter; replaces the target.
        #[arg(long)]
        factors: Option<PathBuf>,
    },
    /// Cluster the training rows.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every (eps, min_pts) pair on the training rows.
    Scan {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one penalty on the training rows.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Coefficient trajectories over the lambda grid.
    Path {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Cross-validate the lambda and alpha grids.
    Cv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// The whole workflow: cluster, tune, fit and forecast.
    Run {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict rows with a saved model.
    Forecast {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Only forecast the trailing N periods of the input.
        #[arg(long)]
        last_periods: Option<usize>,
    },
    /// Write a synthetic panel with known ground truth.
    Synth {
        /// TOML synthetic spec.
        #[arg(long, conflicts_with = "scenario")]
        spec: Option<PathBuf>,
        /// Built-in spec.
        #[arg(long)]
        scenario: Option<Scenario>,
        #[arg(long)]
        out: PathBuf,
        /// Also write planted cluster labels per row.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| DprError::InvalidArgument(format!("cannot read '{}': {e}", path.display())))
}

fn load_config(g: &Global) -> Result<DprConfig> {
    let mut c = match &g.config {
        Some(p) => DprConfig::from_toml(&read_text(p)?)?,
        None => DprConfig::default(),
    };
    if g.core_strict {
        c.clustering.core_strict = true;
    }
    if g.refit_clusters_full {
        c.clustering.refit_full = true;
    }
    if let Some(v) = g.eps {
        c.clustering.eps = v;
    }
    if let Some(v) = g.min_pts {
        c.clustering.min_pts = v;
    }
    if let Some(v) = &g.eps_grid {
        c.clustering.eps_grid = v.clone();
    }
    if let Some(v) = &g.minpts_grid {
        c.clustering.min_pts_grid = v.clone();
    }
    if let Some(v) = g.log_offset {
        c.transform.log_offset = v;
    }
    if let Some(v) = &g.normalize {
        c.transform.normalize_mode = v.parse()?;
    }
    if let Some(v) = &g.outlier_policy {
        c.regression.outlier_policy = v.parse()?;
    }
    if let Some(v) = g.baseline_cluster {
        c.regression.baseline_cluster = v;
    }
    if let Some(v) = g.kind {
        c.regression.kind = v.penalty_kind();
    }
    if let Some(v) = &g.lambda_grid {
        c.regression.lambda_grid = v.clone();
    }
    if let Some(v) = &g.alpha_grid {
        c.regression.alpha_grid = v.clone();
    }
    if let Some(v) = g.tol {
        c.regression.tol = v;
    }
    if let Some(v) = g.max_iter {
        c.regression.max_iter = v;
    }
    if let Some(v) = g.test_periods {
        c.split.test_periods = v;
    }
    if let Some(v) = g.folds {
        c.split.cv_folds = v;
    }
    if let Some(v) = &g.fold_shape {
        c.split.fold_shape = v.parse()?;
    }
    if let Some(v) = g.holdout_periods {
        c.split.holdout_periods = v;
    }
    c.validate()?;
    Ok(c)
}

fn load_input(path: &Path) -> Result<PanelDataset> {
    let file = fs::File::open(path)
        .map_err(|e| DprError::InvalidArgument(format!("cannot open '{}': {e}", path.display())))?;
    load_panel(BufReader::new(file), &PanelSchema::default())
}

/// The training periods of `data` under the configured split.
fn training_rows(data: &PanelDataset, config: &mut DprConfig) -> Result<PanelDataset> {
    match configured_split(data, config)? {
        Some(s) => {
            config.split.cv_folds = s.cv_folds;
            Ok(chronological_split(data, &s)?.0)
        }
        None => Ok(data.clone()),
    }
}

fn label_list(labels: &[Label]) -> (usize, usize) {
    let k = labels.iter().flatten().max().map_or(0, |m| m + 1);
    (k, labels.iter().filter(|l| l.is_none()).count())
}

fn ingest(
    input: &Path,
    out: &Path,
    schema: Option<&Path>,
    overrides: (Option<String>, Option<String>, Option<String>, bool, Option<Vec<String>>, Option<char>),
    factors: Option<&Path>,
) -> Result<String> {
    let mut s = match schema {
        Some(p) => PanelSchema::from_toml(&read_text(p)?)?,
        None => PanelSchema::default(),
    };
    let (entity, period, target, no_target, features, delimiter) = overrides;
    if let Some(v) = entity {
        s.entity = v;
    }
    if let Some(v) = period {
        s.period = v;
    }
    if let Some(v) = target {
        s.target = Some(v);
    }
    if no_target {
        s.target = None;
    }
    if let Some(v) = features {
        s.features = v;
    }
    if let Some(v) = delimiter {
        s.delimiter = v;
    }
    let file = fs::File::open(input)
        .map_err(|e| DprError::InvalidArgument(format!("cannot open '{}': {e}", input.display())))?;
    let mut data = load_panel(BufReader::new(file), &s)?;
    if let Some(f) = factors {
        let file = fs::File::open(f)
            .map_err(|e| DprError::InvalidArgument(format!("cannot open '{}': {e}", f.display())))?;
        let table = EmissionFactorTable::load(BufReader::new(file), s.delimiter)?;
        data = compute_emissions(&data, &table)?;
    }
    let mut bytes = Vec::new();
    write_panel(&mut bytes, &data, ',')?;
    write_file_atomic(out, &bytes)?;
    Ok(format!(
        "ingest rows={} entities={} periods={} features={}",
        data.len(),
        data.entities().len(),
        data.periods().len(),
        data.feature_names().len()
    ))
}

fn cluster(config: &DprConfig, input: &Path, out: &Path) -> Result<String> {
    let mut config = config.clone();
    let data = load_input(input)?;
    let train = training_rows(&data, &mut config)?;
    let c = cluster_stage(&train, &config)?;
    let ids = dpr_core::pipeline::row_ids(&train);
    write_dir_atomic(out, |dir| {
        report::write_clusters(&dir.join("clusters.csv"), &ids, &c.model)?;
        report::write_k_distance(&dir.join("k_distance.csv"), &c.k_distance)?;
        if let Some(scan) = &c.scan {
            report::write_scan(&dir.join("scan.csv"), scan)?;
        }
        Ok(())
    })?;
    Ok(format!(
        "cluster rows={} eps={} min_pts={} k={} noise={} sc={}",
        train.len(),
        num17(c.model.params.eps),
        c.model.params.min_pts,
        c.model.k,
        c.model.noise_count(),
        c.model.sc.map_or("undefined".into(), num17)
    ))
}

fn scan(config: &DprConfig, input: &Path, out: &Path) -> Result<String> {
    let mut config = config.clone();
    let cc = &config.clustering;
    if cc.eps_grid.is_empty() {
        return Err(DprError::InvalidArgument("scan needs --eps-grid and --minpts-grid".into()));
    }
    let (eps_grid, min_pts_grid, strict) = (cc.eps_grid.clone(), cc.min_pts_grid.clone(), cc.core_strict);
    let data = load_input(input)?;
    let train = training_rows(&data, &mut config)?;
    let mix = dpr_core::data_model::energy_mix_features(&train, config.transform.normalize_mode);
    let rows = scan_params(&mix.values, &eps_grid, &min_pts_grid, strict)?;
    write_dir_atomic(out, |dir| report::write_scan(&dir.join("scan.csv"), &rows))?;
    Ok(match best_scan_row(&rows) {
        Some(b) => format!(
            "scan cells={} best_eps={} best_min_pts={} k={} noise={} sc={}",
            rows.len(),
            num17(b.eps),
            b.min_pts,
            b.k,
            b.noise,
            b.sc.map_or("undefined".into(), num17)
        ),
        None => format!("scan cells={} best=undefined", rows.len()),
    })
}

fn penalty_for(config: &DprConfig, lambda: f64, alpha: Option<f64>) -> Result<PenaltySpec> {
    use penalized::PenaltyKind::*;
    let kind = config.regression.kind;
    let alpha = match (kind, alpha) {
        (ElasticNet, Some(a)) => a,
        (ElasticNet, None) => {
            return Err(DprError::InvalidArgument("elastic net needs --alpha".into()));
        }
        (Ridge, _) => 0.0,
        (Lasso, _) => 1.0,
    };
    let p = PenaltySpec::of_kind(kind, lambda, alpha);
    p.validate()?;
    Ok(p)
}

fn fit(config: &DprConfig, input: &Path, out: &Path, lambda: f64, alpha: Option<f64>) -> Result<String> {
    let mut config = config.clone();
    let penalty = penalty_for(&config, lambda, alpha)?;
    let data = load_input(input)?;
    let train = training_rows(&data, &mut config)?;
    let f = fit_stage(&train, &config, penalty)?;
    write_dir_atomic(out, |dir| {
        report::write_coefficients(&dir.join("coefficients.csv"), &f.model)?;
        report::write_fitted(&dir.join("fitted.csv"), &f.fitted)?;
        let mut model = Vec::new();
        f.bundle.write(&mut model)?;
        fs::write(dir.join("model.txt"), model)
            .map_err(DprError::from)
    })?;
    Ok(format!(
        "fit kind={} lambda={} alpha={} rows={} mse={} r2={} sparsity={}",
        penalty.kind.as_str(),
        num17(penalty.lambda),
        num17(penalty.mixing()),
        f.train_metrics.rows,
        num17(f.train_metrics.mse),
        f.train_metrics.r2.map_or("undefined".into(), num17),
        num17(f.train_metrics.sparsity)
    ))
}

fn path(config: &DprConfig, input: &Path, out: &Path, alpha: Option<f64>) -> Result<String> {
    let mut config = config.clone();
    let mixing = penalty_for(&config, 0.0, alpha)?.mixing();
    let data = load_input(input)?;
    let train = training_rows(&data, &mut config)?;
    let c = cluster_stage(&train, &config)?;
    let aug = design_stage(&train, &config, &c)?;
    let grid = lambda_grid(&aug.design, &config.regression);
    let models = penalized::regularization_path(
        &aug.design,
        &grid,
        config.regression.kind,
        mixing,
        &config.regression.cd_options(),
    )?;
    let points: Vec<PathPoint> = models
        .iter()
        .map(|m| PathPoint {
            lambda: m.penalty.lambda,
            alpha: mixing,
            coefficients: m.coefficients.clone(),
            converged: m.diagnostics.converged,
        })
        .collect();
    write_dir_atomic(out, |dir| {
        report::write_path(&dir.join("path_trajectories.csv"), &points, &aug.design.column_names)
    })?;
    Ok(format!(
        "path kind={} alpha={} points={} columns={} unconverged={}",
        config.regression.kind.as_str(),
        num17(mixing),
        points.len(),
        aug.design.ncols(),
        points.iter().filter(|p| !p.converged).count()
    ))
}

fn cv(config: &DprConfig, input: &Path, out: &Path) -> Result<String> {
    let mut config = config.clone();
    let data = load_input(input)?;
    let train = training_rows(&data, &mut config)?;
    let c = cluster_stage(&train, &config)?;
    let aug = design_stage(&train, &config, &c)?;
    let reg = &config.regression;
    let grid = lambda_grid(&aug.design, reg);
    let folds = fold_assignment(&train, &aug.kept_rows, &config.split);
    let result = cross_validate(&aug.design, &folds, reg.kind, &grid, &reg.alpha_grid, &reg.cd_options())?;
    write_dir_atomic(out, |dir| report::write_cv_table(&dir.join("cv_table.csv"), &result))?;
    Ok(format!(
        "cv kind={} cells={} folds={} best_lambda={} best_alpha={} mse={} r2={}",
        result.kind.as_str(),
        result.table.len(),
        config.split.cv_folds,
        num17(result.best_lambda),
        num17(result.best_alpha),
        num17(result.validation_mse),
        result.validation_r2.map_or("undefined".into(), num17)
    ))
}

fn run(config: &DprConfig, input: &Path, out: &Path) -> Result<String> {
    let data = load_input(input)?;
    let split = configured_split(&data, config)?;
    let r = run_dpr(&data, config, split.as_ref())?;
    write_run_report(out, &r)?;
    let v = &r.train.validation_metrics;
    let mut line = format!(
        "run k={} noise={} kind={} lambda={} alpha={} validation_mse={} validation_r2={} sparsity={}",
        r.train.clusters.model.k,
        r.train.clusters.model.noise_count(),
        r.train.model.penalty.kind.as_str(),
        num17(r.train.model.penalty.lambda),
        num17(r.train.model.penalty.mixing()),
        num17(v.mse),
        v.r2.map_or("undefined".into(), num17),
        num17(v.sparsity)
    );
    if let Some(m) = r.test.as_ref().and_then(|t| t.metrics.as_ref()) {
        line += &format!(" test_mse={} test_r2={}", num17(m.mse), m.r2.map_or("undefined".into(), num17));
    }
    for n in &r.notes {
        eprintln!("note: {n}");
    }
    Ok(line)
}

fn forecast(model: &Path, input: &Path, out: &Path, last_periods: Option<usize>) -> Result<String> {
    let file = fs::File::open(model)
        .map_err(|e| DprError::InvalidArgument(format!("cannot open '{}': {e}", model.display())))?;
    let bundle = ModelBundle::read(BufReader::new(file))?;
    let mut data = load_input(input)?;
    if let Some(n) = last_periods {
        let periods = data.periods();
        if n == 0 || n > periods.len() {
            return Err(DprError::InvalidArgument(format!(
                "--last-periods {n} must be between 1 and {}",
                periods.len()
            )));
        }
        let keep: Vec<String> = periods[periods.len() - n..].to_vec();
        data = data.filter_periods(|p| keep.iter().any(|k| k == p));
    }
    let t = test_stage(&bundle, &data)?;
    let labels: Vec<Label> = t.predicted_rows.iter().map(|&i| t.labels[i]).collect();
    let summary = json!({
        "rows": t.forecast.rows.len(),
        "excluded_noise_rows": t.dropped_rows.len(),
        "noise_rows": t.labels.iter().filter(|l| l.is_none()).count(),
        "test": t.metrics.as_ref().map_or(serde_json::Value::Null, metrics_json),
        "mean_error": t.forecast.mean_error.map_or(serde_json::Value::Null, jnum),
        "error_variance": t.forecast.error_variance.map_or(serde_json::Value::Null, jnum),
    });
    write_dir_atomic(out, |dir| {
        report::write_assignments(&dir.join("test_clusters.csv"), &t.rows, &t.labels)?;
        report::write_forecast(&dir.join("forecast.csv"), &t.forecast, &labels)?;
        write_json(&dir.join("summary.json"), &summary)
    })?;
    let (_, noise) = label_list(&t.labels);
    Ok(format!(
        "forecast rows={} noise={} mean_error={} error_variance={}",
        t.forecast.rows.len(),
        noise,
        t.forecast.mean_error.map_or("undefined".into(), num17),
        t.forecast.error_variance.map_or("undefined".into(), num17)
    ))
}

fn synth(seed: Option<u64>, spec: Option<&Path>, scenario: Option<Scenario>, out: &Path, truth: Option<&Path>) -> Result<String> {
    let mut s = match (spec, scenario) {
        (Some(p), _) => SyntheticSpec::from_toml(&read_text(p)?)?,
        (None, Some(sc)) => {
            let seed = seed.ok_or_else(|| DprError::InvalidArgument("--scenario needs an explicit --seed".into()))?;
            match sc {
                Scenario::SixCluster => scenarios::six_cluster_spec(seed),
                Scenario::Collinear => scenarios::collinear_spec(seed),
            }
        }
        (None, None) => return Err(DprError::InvalidArgument("synth needs --spec or --scenario".into())),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let (data, gt) = generate_panel(&s)?;
    let mut bytes = Vec::new();
    write_panel(&mut bytes, &data, ',')?;
    write_file_atomic(out, &bytes)?;
    if let Some(t) = truth {
        let mut text = String::from("entity,period,cluster,eta\n");
        for (o, (c, eta)) in data.observations().iter().zip(gt.labels.iter().zip(&gt.eta)) {
            text += &format!("{},{},{c},{}\n", data.entity_label(o), data.period_label(o), num17(*eta));
        }
        write_file_atomic(t, text.as_bytes())?;
    }
    let (k, _) = label_list(&gt.labels.iter().map(|&c| Some(c)).collect::<Vec<_>>());
    Ok(format!(
        "synth rows={} entities={} periods={} features={} clusters={} seed={} clipped={}",
        data.len(),
        data.entities().len(),
        data.periods().len(),
        data.feature_names().len(),
        k,
        s.seed,
        gt.clipped_rows.len()
    ))
}

fn execute(cli: Cli) -> Result<String> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| DprError::InvalidArgument(format!("cannot start {n} threads: {e}")))?;
    }
    match cli.command {
        Command::Ingest {
            input,
            out,
            schema,
            entity_col,
            period_col,
            target_col,
            no_target,
            features,
            delimiter,
            factors,
        } => ingest(
            &input,
            &out,
            schema.as_deref(),
            (entity_col, period_col, target_col, no_target, features, delimiter),
            factors.as_deref(),
        ),
        Command::Synth {
            spec,
            scenario,
            out,
            truth,
        } => synth(g.seed, spec.as_deref(), scenario, &out, truth.as_deref()),
        Command::Forecast {
            model,
            input,
            out,
            last_periods,
        } => forecast(&model, &input, &out, last_periods),
        Command::Cluster { input, out } => cluster(&load_config(g)?, &input, &out),
        Command::Scan { input, out } => scan(&load_config(g)?, &input, &out),
        Command::Fit {
            input,
            out,
            lambda,
            alpha,
        } => fit(&load_config(g)?, &input, &out, lambda, alpha),
        Command::Path { input, out, alpha } => path(&load_config(g)?, &input, &out, alpha),
        Command::Cv { input, out } => cv(&load_config(g)?, &input, &out),
        Command::Run { input, out } => run(&load_config(g)?, &input, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
