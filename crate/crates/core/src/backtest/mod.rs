//! Sliding-window evaluation of CSVQR against the reference forecasters.
//!
//! For each test month the model is trained on the three preceding calendar
//! months, the month's hourly NWP rows are forecast in one shot, and the
//! forecasts are scored with PICP/ACE per nominal coverage and with the
//! quantile score.

mod report;
mod tuning;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::benchmarks::BenchmarkKind;
use crate::csvqr::{CsvqrConfig, CsvqrModel, QuantileLevels, SolveStatus};
use crate::dataset::{make_windows, SlidingWindowSplit, TimeSeriesRecord, YearMonth};
use crate::features::{build_features, FeatureConfig};
use crate::kernels::KernelSpec;
use crate::metrics::{ace, mean_sd, picp_lenient, qscore_cells};
use crate::{Error, Result};

pub use report::{
    export_report, fanchart_file_name, summary, FANCHART_PREFIX, QSCORE_FILE, RELIABILITY_FILE,
};
pub use tuning::{
    tune_hyperparameters, GridScore, HyperGrid, TuneResult, DEFAULT_HOLDOUT_FRACTION,
};

/// Level pairs for the 80, 60, 40 and 20 % prediction intervals.
pub const DEFAULT_INTERVAL_PAIRS: [(f64, f64); 4] =
    [(0.1, 0.9), (0.2, 0.8), (0.3, 0.7), (0.4, 0.6)];

/// Label of the row aggregating every month.
pub const OVERALL_LABEL: &str = "All";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Csvqr,
    Benchmark(BenchmarkKind),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Csvqr => "csvqr",
            Method::Benchmark(b) => b.name(),
        }
    }

    /// Parse a comma-separated method list.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let methods: Vec<Method> = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csvqr" => Ok(Method::Csvqr),
            other => other.parse::<BenchmarkKind>().map(Method::Benchmark),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig {
    pub levels: QuantileLevels,
    pub interval_pairs: Vec<(f64, f64)>,
    pub grid: HyperGrid,
    /// Template for every CSVQR fit; `c` and `kernel` come from tuning.
    pub solver: CsvqrConfig,
    pub features: FeatureConfig,
    /// Keep every `thin`-th training row; 1 keeps all.
    pub thin: usize,
    pub holdout_fraction: f64,
    pub persistence_hours: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        BacktestConfig {
            levels: QuantileLevels::deciles(),
            interval_pairs: DEFAULT_INTERVAL_PAIRS.to_vec(),
            grid: HyperGrid::default(),
            solver: CsvqrConfig::default(),
            features: FeatureConfig::default(),
            thin: 1,
            holdout_fraction: DEFAULT_HOLDOUT_FRACTION,
            persistence_hours: crate::benchmarks::DEFAULT_PERSISTENCE_HOURS,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidArgument(
                "thinning factor must be at least 1".into(),
            ));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
        }
        for &(lo, hi) in &self.interval_pairs {
            if lo >= hi || self.levels.index_of(lo).is_none() || self.levels.index_of(hi).is_none()
            {
                return Err(Error::InvalidArgument(format!(
                    "interval ({lo}, {hi}) is not a pair of estimated levels"
                )));
            }
        }
        self.solver.validate()
    }
}

/// Raw forecasts of one method for one test month.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodForecast {
    pub method: Method,
    pub timestamps: Vec<NaiveDateTime>,
    pub observed: Vec<Option<f64>>,
    /// `hours x M`.
    pub quantiles: Array2<f64>,
    /// Selected `(C, sigma)` for CSVQR.
    pub hyperparameters: Option<(f64, f64)>,
    pub solver_status: Option<SolveStatus>,
    /// Crossed adjacent levels at the training inputs (CSVQR only).
    pub training_crossings: usize,
    /// Crossed adjacent levels over the test month's forecasts.
    pub query_crossings: usize,
    /// Latest timestamp of any row consumed to build this forecast.
    pub latest_input: Option<NaiveDateTime>,
}

impl MethodForecast {
    /// Observed values and forecast rows for the hours with observed power.
    pub fn scored_rows(&self) -> (Vec<f64>, Array2<f64>) {
        let keep: Vec<usize> = (0..self.observed.len())
            .filter(|&i| self.observed[i].is_some())
            .collect();
        let y = keep
            .iter()
            .map(|&i| self.observed[i].expect("filtered"))
            .collect();
        let q = self.quantiles.select(ndarray::Axis(0), &keep);
        (y, q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonthResult {
    pub split: SlidingWindowSplit,
    pub forecasts: Vec<MethodForecast>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityRow {
    pub month: YearMonth,
    pub method: Method,
    pub pinc: f64,
    pub picp: f64,
    pub ace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QscoreRow {
    /// `None` for the row aggregating all months.
    pub month: Option<YearMonth>,
    pub method: Method,
    pub mean: f64,
    pub sd: f64,
    pub cells: usize,
    pub query_crossings: usize,
}

impl QscoreRow {
    pub fn month_label(&self) -> String {
        self.month
            .map(|m| m.to_string())
            .unwrap_or_else(|| OVERALL_LABEL.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub levels: QuantileLevels,
    pub interval_pairs: Vec<(f64, f64)>,
    pub months: Vec<MonthResult>,
    pub reliability: Vec<ReliabilityRow>,
    pub qscore: Vec<QscoreRow>,
}

impl BacktestReport {
    pub fn forecast(&self, month: YearMonth, method: Method) -> Option<&MethodForecast> {
        self.months
            .iter()
            .find(|m| m.split.test_month == month)
            .and_then(|m| m.forecasts.iter().find(|f| f.method == method))
    }

    pub fn overall(&self, method: Method) -> Option<&QscoreRow> {
        self.qscore
            .iter()
            .find(|r| r.month.is_none() && r.method == method)
    }

    /// Mean ACE over all month x PINC cells of one method.
    pub fn mean_ace(&self, method: Method) -> Option<f64> {
        let v: Vec<f64> = self
            .reliability
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.ace)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Reliability rows for one forecast. Crossed intervals count as misses.
pub fn reliability_rows(
    forecast: &MethodForecast,
    month: YearMonth,
    levels: &QuantileLevels,
    pairs: &[(f64, f64)],
) -> Result<Vec<ReliabilityRow>> {
    let (y, q) = forecast.scored_rows();
    if y.is_empty() {
        return Ok(Vec::new());
    }
    let intervals = crate::csvqr::predict_intervals(q.view(), levels, pairs)?;
    intervals
        .iter()
        .map(|pi| {
            let p = picp_lenient(&pi.lower, &pi.upper, &y)?;
            Ok(ReliabilityRow {
                month,
                method: forecast.method,
                pinc: pi.nominal_coverage(),
                picp: p,
                ace: ace(p, pi.beta())?,
            })
        })
        .collect()
}

/// All per-cell quantile scores of one forecast, restricted to observed hours.
pub fn score_cells(forecast: &MethodForecast, levels: &QuantileLevels) -> Result<Vec<f64>> {
    let (y, q) = forecast.scored_rows();
    qscore_cells(q.view(), &y, levels.as_slice())
}

fn thin_rows<T: Clone>(rows: &[T], k: usize) -> Vec<T> {
    rows.iter().step_by(k).cloned().collect()
}

fn features_of(rows: &[&TimeSeriesRecord], cfg: &FeatureConfig) -> Result<Array2<f64>> {
    build_features(rows.iter().copied(), cfg)
}

struct CsvqrFit {
    quantiles: Array2<f64>,
    hyperparameters: (f64, f64),
    status: SolveStatus,
    training_crossings: usize,
}

fn csvqr_forecast(
    train: &[&TimeSeriesRecord],
    test: &[&TimeSeriesRecord],
    config: &BacktestConfig,
) -> Result<CsvqrFit> {
    let x_train = features_of(train, &config.features)?;
    let y_train: Vec<f64> = train.iter().map(|r| r.power.expect("observed")).collect();
    let tuned = tune_hyperparameters(
        x_train.view(),
        &y_train,
        &config.grid,
        &config.levels,
        &config.solver,
        config.holdout_fraction,
    )?;
    let (c, sigma) = tuned.best;
    let cfg = CsvqrConfig {
        c,
        kernel: KernelSpec::rbf(sigma)?,
        ..config.solver
    };
    let model = CsvqrModel::fit_scaled(x_train.view(), &y_train, &config.levels, &cfg)?;
    let training_crossings = CsvqrModel::count_crossings(model.fitted_training().view(), 1e-6);
    let x_test = features_of(test, &config.features)?;
    let q = model.predict(x_test.view())?;
    Ok(CsvqrFit {
        quantiles: q,
        hyperparameters: (c, sigma),
        status: model.status,
        training_crossings,
    })
}

fn forecast_month(
    records: &[TimeSeriesRecord],
    split: &SlidingWindowSplit,
    method: Method,
    config: &BacktestConfig,
) -> Result<MethodForecast> {
    let test: Vec<&TimeSeriesRecord> = records
        .iter()
        .filter(|r| split.test_range.contains(r.timestamp))
        .collect();
    let horizon = test.len();
    let timestamps = test.iter().map(|r| r.timestamp).collect();
    let observed = test.iter().map(|r| r.power).collect();

    let mut out = MethodForecast {
        method,
        timestamps,
        observed,
        quantiles: Array2::zeros((0, 0)),
        hyperparameters: None,
        solver_status: None,
        training_crossings: 0,
        query_crossings: 0,
        latest_input: None,
    };
    match method {
        Method::Csvqr => {
            let window: Vec<&TimeSeriesRecord> = records
                .iter()
                .filter(|r| split.train_range.contains(r.timestamp))
                .collect();
            let observed_rows: Vec<&TimeSeriesRecord> =
                window.iter().copied().filter(|r| r.has_power()).collect();
            let dropped = window.len() - observed_rows.len();
            if dropped > 0 {
                log::info!(
                    "{}: dropped {dropped} training rows without observed power",
                    split.test_month
                );
            }
            let train = thin_rows(&observed_rows, config.thin);
            let fit = csvqr_forecast(&train, &test, config)?;
            out.latest_input = train.iter().map(|r| r.timestamp).max();
            out.quantiles = fit.quantiles;
            out.hyperparameters = Some(fit.hyperparameters);
            out.solver_status = Some(fit.status);
            out.training_crossings = fit.training_crossings;
        }
        Method::Benchmark(kind) => {
            let kind = match kind {
                BenchmarkKind::Persistence { .. } => BenchmarkKind::Persistence {
                    window_hours: config.persistence_hours,
                },
                other => other,
            };
            let past: Vec<&TimeSeriesRecord> = records
                .iter()
                .filter(|r| r.timestamp < split.test_range.start && r.has_power())
                .collect();
            let history: Vec<f64> = past.iter().map(|r| r.power.expect("observed")).collect();
            out.quantiles = kind.forecast(&history, horizon, &config.levels)?;
            out.latest_input = match kind {
                BenchmarkKind::Uniform => None,
                BenchmarkKind::Persistence { window_hours } => past[past.len() - window_hours..]
                    .iter()
                    .map(|r| r.timestamp)
                    .max(),
                BenchmarkKind::Climatology => past.iter().map(|r| r.timestamp).max(),
            };
        }
    }
    out.query_crossings = CsvqrModel::count_crossings(out.quantiles.view(), 0.0);
    Ok(out)
}

/// Run every method over every test month from `first` to `last`.
///
/// `records` must hold a single zone in timestamp order.
pub fn run_backtest(
    records: &[TimeSeriesRecord],
    methods: &[Method],
    first: YearMonth,
    last: YearMonth,
    config: &BacktestConfig,
) -> Result<BacktestReport> {
    config.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods selected".into()));
    }
    if let Some(z) = records.first().map(|r| r.zone) {
        if records.iter().any(|r| r.zone != z) {
            return Err(Error::InvalidArgument(
                "backtest records must come from a single zone".into(),
            ));
        }
    }
    let splits = make_windows(records, first, last)?;

    let tasks: Vec<(usize, Method)> = (0..splits.len())
        .flat_map(|s| methods.iter().map(move |&m| (s, m)))
        .collect();
    let results: Vec<MethodForecast> = tasks
        .par_iter()
        .map(|&(s, method)| {
            let split = &splits[s];
            log::info!("{}: forecasting with {method}", split.test_month);
            forecast_month(records, split, method, config)
                .map_err(|e| e.context(format!("month {} method {method}", split.test_month)))
        })
        .collect::<Result<_>>()?;

    let mut months: Vec<MonthResult> = splits
        .iter()
        .map(|&split| MonthResult {
            split,
            forecasts: Vec::with_capacity(methods.len()),
        })
        .collect();
    for ((s, _), forecast) in tasks.iter().zip(results) {
        months[*s].forecasts.push(forecast);
    }
    assemble(
        config.levels.clone(),
        config.interval_pairs.clone(),
        months,
        methods,
    )
}

/// Compute the reliability and quantile-score tables from raw forecasts.
pub fn assemble(
    levels: QuantileLevels,
    interval_pairs: Vec<(f64, f64)>,
    months: Vec<MonthResult>,
    methods: &[Method],
) -> Result<BacktestReport> {
    let mut reliability = Vec::new();
    let mut qscore = Vec::new();
    let mut pooled: Vec<(Vec<f64>, usize)> = vec![(Vec::new(), 0); methods.len()];
    for month in &months {
        for f in &month.forecasts {
            let ctx = |e: Error| {
                e.context(format!(
                    "month {} method {}",
                    month.split.test_month, f.method
                ))
            };
            reliability.extend(
                reliability_rows(f, month.split.test_month, &levels, &interval_pairs)
                    .map_err(ctx)?,
            );
            let cells = score_cells(f, &levels).map_err(ctx)?;
            if cells.is_empty() {
                continue;
            }
            let (mean, sd) = mean_sd(&cells)?;
            qscore.push(QscoreRow {
                month: Some(month.split.test_month),
                method: f.method,
                mean,
                sd,
                cells: cells.len(),
                query_crossings: f.query_crossings,
            });
            let k = methods
                .iter()
                .position(|m| *m == f.method)
                .expect("method listed");
            pooled[k].0.extend(cells);
            pooled[k].1 += f.query_crossings;
        }
    }
    for (method, (cells, crossings)) in methods.iter().zip(pooled) {
        if cells.is_empty() {
            continue;
        }
        let (mean, sd) = mean_sd(&cells)?;
        qscore.push(QscoreRow {
            month: None,
            method: *method,
            mean,
            sd,
            cells: cells.len(),
            query_crossings: crossings,
        });
    }
    Ok(BacktestReport {
        levels,
        interval_pairs,
        months,
        reliability,
        qscore,
    })
}

/// Score a forecast matrix against observations without a full backtest.
pub fn evaluate_forecast(
    quantiles: ArrayView2<'_, f64>,
    observed: &[f64],
    levels: &QuantileLevels,
    pairs: &[(f64, f64)],
) -> Result<(Vec<crate::metrics::ReliabilityResult>, (f64, f64))> {
    let intervals = crate::csvqr::predict_intervals(quantiles, levels, pairs)?;
    let rel = intervals
        .iter()
        .map(|pi| {
            let p = picp_lenient(&pi.lower, &pi.upper, observed)?;
            Ok(crate::metrics::ReliabilityResult {
                pinc: pi.nominal_coverage(),
                picp: p,
                ace: ace(p, pi.beta())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let q = mean_sd(&qscore_cells(quantiles, observed, levels.as_slice())?)?;
    Ok((rel, q))
}
