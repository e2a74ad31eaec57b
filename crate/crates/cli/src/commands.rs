use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use csvqr_core::backtest::{
    export_report, run_backtest, summary, tune_hyperparameters, BacktestConfig, HyperGrid, Method,
    DEFAULT_HOLDOUT_FRACTION, DEFAULT_INTERVAL_PAIRS,
};
use csvqr_core::csvqr::{
    read_model, write_model, CsvqrConfig, CsvqrModel, QuantileLevels, SolveStatus,
};
use csvqr_core::dataset::{
    load_csv, select_zone, write_csv, ColumnMapping, TimeSeriesRecord, YearMonth, TIMESTAMP_FORMAT,
};
use csvqr_core::features::{build_features, FeatureConfig, FEATURE_NAMES};
use csvqr_core::kernels::KernelSpec;
use csvqr_core::synthetic::HeteroscedasticProcess;
use ndarray::Array2;

use crate::args::{BacktestArgs, EvaluateArgs, FitArgs, IngestArgs, Model, PredictArgs, Source};
use crate::error::{in_module, CliError, CliResult};

/// Last test month of the default data backtest.
const DEFAULT_LAST_MONTH: &str = "2013-11";

fn month(s: &str, flag: &str) -> CliResult<YearMonth> {
    s.parse()
        .map_err(|_| CliError::usage(format!("--{flag}: expected YYYY-MM, got {s:?}")))
}

/// `YYYY-MM` or `YYYY-MM:YYYY-MM`.
pub fn month_range(s: &str, flag: &str) -> CliResult<(YearMonth, YearMonth)> {
    let (a, b) = s.split_once(':').unwrap_or((s, s));
    let (first, last) = (month(a, flag)?, month(b, flag)?);
    if last < first {
        return Err(CliError::usage(format!(
            "--{flag}: {last} precedes {first}"
        )));
    }
    Ok((first, last))
}

/// Levels as `start:stop:step` (inclusive) or a comma list.
pub fn parse_levels(s: &str) -> CliResult<QuantileLevels> {
    s.parse()
        .map_err(|e| CliError::usage(format!("--levels: {e}")))
}

fn parse_list(s: &str, flag: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::usage(format!("--{flag}: cannot parse {p:?} as a number")))
        })
        .collect()
}

fn parse_grid(model: &Model) -> CliResult<HyperGrid> {
    let default = HyperGrid::default();
    let cs = match &model.grid_c {
        Some(s) => parse_list(s, "grid-C")?,
        None => default.cs,
    };
    let sigmas = match &model.grid_sigma {
        Some(s) => parse_list(s, "grid-sigma")?,
        None => default.sigmas,
    };
    if cs.iter().any(|&c| c <= 0.0) || sigmas.iter().any(|&s| s <= 0.0) {
        return Err(CliError::usage(
            "--grid-C and --grid-sigma values must be positive",
        ));
    }
    Ok(HyperGrid { cs, sigmas })
}

struct ModelSettings {
    levels: QuantileLevels,
    grid: HyperGrid,
    solver: CsvqrConfig,
    thin: usize,
}

fn model_settings(model: &Model) -> CliResult<ModelSettings> {
    let levels = parse_levels(&model.levels)?;
    let grid = parse_grid(model)?;
    if model.thin == 0 {
        return Err(CliError::usage("--thin must be at least 1"));
    }
    if !(model.tol > 0.0 && model.tol.is_finite()) {
        return Err(CliError::usage("--tol must be positive"));
    }
    if model.max_iter == 0 {
        return Err(CliError::usage("--max-iter must be at least 1"));
    }
    let solver = CsvqrConfig {
        tol: model.tol,
        max_iter: model.max_iter,
        ..CsvqrConfig::default()
    };
    Ok(ModelSettings {
        levels,
        grid,
        solver,
        thin: model.thin,
    })
}

fn check_source(source: &Source) -> CliResult<()> {
    if source.data.is_none() && !source.synthetic {
        return Err(CliError::usage("one of --data or --synthetic is required"));
    }
    Ok(())
}

/// Records of the selected zone. Synthetic data is generated for exactly
/// `first..=last`; file data is returned whole.
fn load(source: &Source, first: YearMonth, last: YearMonth) -> CliResult<Vec<TimeSeriesRecord>> {
    let records = match &source.data {
        Some(path) => {
            let all = load_csv(path, &ColumnMapping::default()).map_err(in_module("dataset"))?;
            select_zone(&all, source.zone)
        }
        None => HeteroscedasticProcess::default().records(first, last, source.zone, source.seed),
    };
    if records.is_empty() {
        return Err(in_module("dataset")(csvqr_core::Error::Validation(
            format!("no records for zone {}", source.zone),
        )));
    }
    Ok(records)
}

fn in_months(
    records: Vec<TimeSeriesRecord>,
    first: YearMonth,
    last: YearMonth,
) -> Vec<TimeSeriesRecord> {
    records
        .into_iter()
        .filter(|r| r.timestamp >= first.start() && r.timestamp < last.end())
        .collect()
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| in_module("io")(csvqr_core::Error::from(e).context(path.display().to_string()))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| in_module("io")(csvqr_core::Error::from(e).context(path.display().to_string()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_error(path))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(io_error(path))
}

fn warn_unconverged(context: &str, status: &SolveStatus, solver: &CsvqrConfig, c: f64) {
    if !status.converged {
        eprintln!(
            "warning: csvqr: {context}: solver stopped after {} sweeps with KKT violation {:.3e} (tolerance {:.3e})",
            status.sweeps,
            status.kkt,
            solver.tol * c
        );
    }
}

fn optional_range(
    from: &Option<String>,
    to: &Option<String>,
) -> CliResult<Option<(YearMonth, YearMonth)>> {
    let from = from.as_deref().map(|s| month(s, "from")).transpose()?;
    let to = to.as_deref().map(|s| month(s, "to")).transpose()?;
    match (from, to) {
        (None, None) => Ok(None),
        (Some(a), None) => Ok(Some((a, a))),
        (None, Some(b)) => Ok(Some((b, b))),
        (Some(a), Some(b)) if b < a => {
            Err(CliError::usage(format!("--to {b} precedes --from {a}")))
        }
        (Some(a), Some(b)) => Ok(Some((a, b))),
    }
}

fn ingest_records(args: &IngestArgs) -> CliResult<Vec<TimeSeriesRecord>> {
    check_source(&args.source)?;
    let range = optional_range(&args.from, &args.to)?;
    if args.source.synthetic && range.is_none() {
        return Err(CliError::usage("--synthetic needs --from or --to"));
    }
    let (first, last) = range.unwrap_or((
        YearMonth::new(1, 1).expect("valid"),
        YearMonth::new(1, 1).expect("valid"),
    ));
    let records = load(&args.source, first, last)?;
    Ok(match range {
        Some((a, b)) => in_months(records, a, b),
        None => records,
    })
}

pub fn ingest(args: IngestArgs) -> CliResult<()> {
    let records = ingest_records(&args)?;
    let out = create(&args.out)?;
    write_csv(out, &records, &ColumnMapping::default()).map_err(in_module("dataset"))?;
    let observed = records.iter().filter(|r| r.has_power()).count();
    println!(
        "ingest: zone {}: {} hours, {} with observed power -> {}",
        args.source.zone,
        records.len(),
        observed,
        args.out.display()
    );
    Ok(())
}

pub fn features(args: IngestArgs) -> CliResult<()> {
    let records = ingest_records(&args)?;
    let x = build_features(&records, &FeatureConfig::default()).map_err(in_module("features"))?;
    let mut w = csv::Writer::from_writer(create(&args.out)?);
    let mut header = vec!["timestamp"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header).map_err(csv_error(&args.out))?;
    for (r, row) in records.iter().zip(x.rows()) {
        let mut line = vec![r.timestamp.format(TIMESTAMP_FORMAT).to_string()];
        line.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&line).map_err(csv_error(&args.out))?;
    }
    w.flush().map_err(io_error(&args.out))?;
    println!(
        "features: {} hours x {} features -> {}",
        records.len(),
        FEATURE_NAMES.len(),
        args.out.display()
    );
    Ok(())
}

pub fn fit(args: FitArgs) -> CliResult<()> {
    check_source(&args.source)?;
    let (first, last) = month_range(&args.train, "train")?;
    let settings = model_settings(&args.model)?;
    let records = load(&args.source, first, last)?;
    let train: Vec<TimeSeriesRecord> = in_months(records, first, last)
        .into_iter()
        .filter(|r| r.has_power())
        .step_by(settings.thin)
        .collect();
    let label = format!("train {first}:{last}");
    if train.is_empty() {
        return Err(in_module("dataset")(csvqr_core::Error::Coverage {
            month: format!("{first}:{last}"),
        }));
    }
    let x = build_features(&train, &FeatureConfig::default()).map_err(in_module("features"))?;
    let y: Vec<f64> = train.iter().map(|r| r.power.expect("filtered")).collect();
    let ctx = |e: csvqr_core::Error| in_module("csvqr")(e.context(label.clone()));
    let (c, sigma) = tune_hyperparameters(
        x.view(),
        &y,
        &settings.grid,
        &settings.levels,
        &settings.solver,
        DEFAULT_HOLDOUT_FRACTION,
    )
    .map_err(ctx)?
    .best;
    let cfg = CsvqrConfig {
        c,
        kernel: KernelSpec::rbf(sigma).map_err(ctx)?,
        ..settings.solver
    };
    let model = CsvqrModel::fit_scaled(x.view(), &y, &settings.levels, &cfg).map_err(ctx)?;
    let mut out = create(&args.out)?;
    write_model(&mut out, &model).map_err(in_module("csvqr"))?;
    out.flush().map_err(io_error(&args.out))?;
    warn_unconverged(&label, &model.status, &settings.solver, c);
    println!(
        "fit: {label}: {} hours, C={c} sigma={sigma:.4}, {} sweeps, KKT {:.3e} -> {}",
        y.len(),
        model.status.sweeps,
        model.status.kkt,
        args.out.display()
    );
    Ok(())
}

fn level_header(tau: f64) -> String {
    format!("q{tau}")
}

pub fn predict(args: PredictArgs) -> CliResult<()> {
    check_source(&args.source)?;
    let (first, last) = month_range(&args.months, "months")?;
    let file = File::open(&args.model).map_err(io_error(&args.model))?;
    let model = read_model(std::io::BufReader::new(file))
        .map_err(|e| in_module("csvqr")(e.context(args.model.display().to_string())))?;
    let records = in_months(load(&args.source, first, last)?, first, last);
    if records.is_empty() {
        return Err(in_module("dataset")(csvqr_core::Error::Coverage {
            month: format!("{first}:{last}"),
        }));
    }
    let x = build_features(&records, &FeatureConfig::default()).map_err(in_module("features"))?;
    let q = model
        .predict(x.view())
        .map_err(|e| in_module("csvqr")(e.context(format!("predict {first}:{last}"))))?;

    let mut w = csv::Writer::from_writer(create(&args.out)?);
    let mut header = vec!["timestamp".to_string()];
    header.extend(model.levels.as_slice().iter().map(|&t| level_header(t)));
    w.write_record(&header).map_err(csv_error(&args.out))?;
    for (r, row) in records.iter().zip(q.rows()) {
        let mut line = vec![r.timestamp.format(TIMESTAMP_FORMAT).to_string()];
        line.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&line).map_err(csv_error(&args.out))?;
    }
    w.flush().map_err(io_error(&args.out))?;
    let crossings = CsvqrModel::count_crossings(q.view(), 0.0);
    println!(
        "predict: {first}:{last}: {} hours x {} levels, {crossings} crossed pairs -> {}",
        q.nrows(),
        q.ncols(),
        args.out.display()
    );
    Ok(())
}

/// Forecast file contents: timestamps, levels and an `hours x M` matrix.
fn read_forecast(path: &Path) -> CliResult<(Vec<String>, QuantileLevels, Array2<f64>)> {
    let data_err = |msg: String| {
        in_module("evaluate")(csvqr_core::Error::Validation(format!(
            "{}: {msg}",
            path.display()
        )))
    };
    let mut rdr = csv::Reader::from_path(path).map_err(csv_error(path))?;
    let header = rdr.headers().map_err(csv_error(path))?.clone();
    if header.get(0) != Some("timestamp") || header.len() < 2 {
        return Err(data_err(
            "expected a timestamp column followed by q<level> columns".into(),
        ));
    }
    let taus: Vec<f64> = header
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix('q')
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| data_err(format!("bad level column {h:?}")))
        })
        .collect::<CliResult<_>>()?;
    let levels = QuantileLevels::new(taus).map_err(|e| data_err(e.to_string()))?;
    let mut stamps = Vec::new();
    let mut values = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_error(path))?;
        stamps.push(row.get(0).unwrap_or_default().to_string());
        for cell in row.iter().skip(1) {
            values.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| data_err(format!("bad value {cell:?}")))?,
            );
        }
    }
    let q = Array2::from_shape_vec((stamps.len(), levels.len()), values)
        .map_err(|_| data_err("ragged rows".into()))?;
    Ok((stamps, levels, q))
}

pub fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    check_source(&args.source)?;
    let (stamps, levels, q) = read_forecast(&args.forecast)?;
    if stamps.is_empty() {
        return Err(in_module("evaluate")(csvqr_core::Error::Validation(
            "empty forecast file".into(),
        )));
    }
    let first = stamps
        .first()
        .map(|s| month(&s[..7.min(s.len())], "forecast"))
        .transpose()?;
    let last = stamps
        .last()
        .map(|s| month(&s[..7.min(s.len())], "forecast"))
        .transpose()?;
    let (first, last) = (first.expect("nonempty"), last.expect("nonempty"));
    let records = load(&args.source, first, last)?;
    let observed: std::collections::HashMap<String, f64> = records
        .iter()
        .filter_map(|r| {
            r.power
                .map(|p| (r.timestamp.format(TIMESTAMP_FORMAT).to_string(), p))
        })
        .collect();
    let keep: Vec<usize> = (0..stamps.len())
        .filter(|&i| observed.contains_key(&stamps[i]))
        .collect();
    if keep.is_empty() {
        return Err(in_module("evaluate")(csvqr_core::Error::Coverage {
            month: format!("{first}:{last}"),
        }));
    }
    let y: Vec<f64> = keep.iter().map(|&i| observed[&stamps[i]]).collect();
    let q = q.select(ndarray::Axis(0), &keep);
    let pairs: Vec<(f64, f64)> = DEFAULT_INTERVAL_PAIRS
        .iter()
        .copied()
        .filter(|&(lo, hi)| levels.index_of(lo).is_some() && levels.index_of(hi).is_some())
        .collect();
    let (reliability, (mean, sd)) =
        csvqr_core::backtest::evaluate_forecast(q.view(), &y, &levels, &pairs)
            .map_err(in_module("metrics"))?;

    let mut rows = vec![
        ("qscore_mean".to_string(), mean),
        ("qscore_sd".to_string(), sd),
    ];
    for r in &reliability {
        rows.push((format!("picp_{:.0}", r.pinc), r.picp));
        rows.push((format!("ace_{:.0}", r.pinc), r.ace));
    }
    println!(
        "evaluate: {} scored hours of {}: qscore {mean:.4} (sd {sd:.4})",
        y.len(),
        stamps.len()
    );
    for r in &reliability {
        println!("  PINC {:.0}%: PICP {:.2} ACE {:.2}", r.pinc, r.picp, r.ace);
    }
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["metric", "value"])
            .map_err(csv_error(path))?;
        for (k, v) in rows {
            w.write_record([k, v.to_string()])
                .map_err(csv_error(path))?;
        }
        w.flush().map_err(io_error(path))?;
    }
    Ok(())
}

pub fn backtest(args: BacktestArgs) -> CliResult<()> {
    check_source(&args.source)?;
    let first = month(&args.from, "from")?;
    let last = match &args.to {
        Some(s) => month(s, "to")?,
        None if args.source.synthetic => first,
        None => month(DEFAULT_LAST_MONTH, "to")?,
    };
    if last < first {
        return Err(CliError::usage(format!(
            "--to {last} precedes --from {first}"
        )));
    }
    let methods = Method::parse_list(&args.methods)
        .map_err(|e| CliError::usage(format!("--methods: {e}")))?;
    let settings = model_settings(&args.model)?;
    let interval_pairs = DEFAULT_INTERVAL_PAIRS
        .iter()
        .copied()
        .filter(|&(lo, hi)| {
            settings.levels.index_of(lo).is_some() && settings.levels.index_of(hi).is_some()
        })
        .collect();
    let config = BacktestConfig {
        levels: settings.levels,
        interval_pairs,
        grid: settings.grid,
        solver: settings.solver,
        thin: settings.thin,
        ..BacktestConfig::default()
    };

    let records = load(&args.source, first.offset(-3), last)?;
    let report =
        run_backtest(&records, &methods, first, last, &config).map_err(in_module("backtest"))?;
    export_report(&report, &args.out)
        .map_err(|e| in_module("backtest")(e.context(args.out.display().to_string())))?;

    for month in &report.months {
        for f in &month.forecasts {
            if let (Some(status), Some((c, _))) = (&f.solver_status, f.hyperparameters) {
                warn_unconverged(
                    &format!("month {}", month.split.test_month),
                    status,
                    &config.solver,
                    c,
                );
            }
        }
    }
    println!("{}", summary(&report));
    println!("report written to {}", args.out.display());
    Ok(())
}
