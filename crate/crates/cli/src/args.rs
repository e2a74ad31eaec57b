use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "csvqr",
    version,
    about = "Non-crossing kernel quantile regression for month-ahead wind-power forecasts",
    after_help = "Every subcommand accepts --config <file> with key=value lines naming long flags; \
                  flags on the command line override the file."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an hourly CSV and write the selected zone and months back out.
    #[command(args_override_self = true)]
    Ingest(IngestArgs),
    /// Write the 13 wind features for each hour.
    #[command(args_override_self = true)]
    Features(IngestArgs),
    /// Fit a model on a range of training months.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Forecast quantiles for a range of months with a saved model.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Score a quantile forecast file against observed power.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Sliding-window backtest of CSVQR and the benchmark forecasters.
    #[command(args_override_self = true)]
    Backtest(BacktestArgs),
}

#[derive(Debug, Args)]
pub struct Source {
    /// Hourly CSV with TIMESTAMP, ZONEID, TARGETVAR, U10, V10, U100, V100 columns.
    #[arg(long, value_name = "CSV", conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generate the heteroscedastic test process instead of reading --data.
    #[arg(long)]
    pub synthetic: bool,
    #[arg(long, default_value_t = 1)]
    pub zone: u32,
    /// Seed for the synthetic data generator.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct Runtime {
    /// key=value file supplying any long flag.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args)]
pub struct Model {
    /// Quantile levels as `start:stop:step` or a comma list.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    pub levels: String,
    /// Comma-separated candidates for C.
    #[arg(long = "grid-C", value_name = "LIST")]
    pub grid_c: Option<String>,
    /// Comma-separated candidates for the RBF bandwidth.
    #[arg(long = "grid-sigma", value_name = "LIST")]
    pub grid_sigma: Option<String>,
    /// Keep every k-th training hour.
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Solver tolerance relative to C.
    #[arg(long, default_value_t = csvqr_core::csvqr::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = csvqr_core::csvqr::DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub source: Source,
    /// First month to keep (YYYY-MM).
    #[arg(long)]
    pub from: Option<String>,
    /// Last month to keep (YYYY-MM).
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub source: Source,
    /// Training months as `FROM:TO`, e.g. 2013-03:2013-05.
    #[arg(long)]
    pub train: String,
    #[command(flatten)]
    pub model: Model,
    /// Model file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Months to forecast as `YYYY-MM` or `FROM:TO`.
    #[arg(long)]
    pub months: String,
    /// Quantile CSV to write.
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub source: Source,
    /// Quantile CSV as written by `predict`.
    #[arg(long, value_name = "CSV")]
    pub forecast: PathBuf,
    /// Metrics CSV to write; the summary is always printed.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub runtime: Runtime,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub source: Source,
    /// First test month.
    #[arg(long, default_value = "2013-06")]
    pub from: String,
    /// Last test month; defaults to 2013-11 for --data and to --from for --synthetic.
    #[arg(long)]
    pub to: Option<String>,
    #[arg(long, default_value = "csvqr,climatology,persistence,uniform")]
    pub methods: String,
    #[command(flatten)]
    pub model: Model,
    /// Report directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub runtime: Runtime,
}
