use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Values are resolved as flag > `PENFIT_*` environment variable > config
/// file > default, so every field here is optional and the defaults live at
/// the resolution sites.
#[derive(Debug, Parser)]
#[command(
    name = "penfit",
    version,
    about = "Penalized regression paths with marginal false discovery estimates"
)]
pub struct Cli {
    /// TOML file supplying defaults for any long option (snake_case keys).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Cap on worker threads for cross-validation folds and simulation
    /// replications; defaults to the available parallelism.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a regularization path and write it as JSON (or CSV).
    Fit(FitCmd),
    /// Tabulate expected false discoveries along a fitted path.
    Mfdr(MfdrCmd),
    /// Cross-validate over the path and report a selection rule's choice.
    Cv(CvCmd),
    /// Run univariate testing, sample splitting, and the path rule
    /// side by side on one dataset.
    Compare(CompareCmd),
    /// Run a seeded simulation scenario and aggregate the selections.
    Simulate(SimulateCmd),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV with a header row; all non-response columns are features.
    #[arg(value_name = "DATA")]
    pub data_positional: Option<PathBuf>,
    /// Input CSV (alternative to the positional argument).
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Response column: the outcome for gaussian/binomial, the event time
    /// for cox.
    #[arg(long, value_name = "COL")]
    pub y: Option<String>,
    /// Event indicator column (1 = event, 0 = censored); implies cox.
    #[arg(long, value_name = "COL")]
    pub status: Option<String>,
    /// gaussian, binomial, or cox; inferred from the response when absent.
    #[arg(long, value_name = "NAME")]
    pub family: Option<String>,
    /// Comma-separated feature columns kept in every model without penalty.
    #[arg(long, value_name = "COLS")]
    pub unpenalized: Option<String>,
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    /// lasso (default), enet, mcp, or scad.
    #[arg(long, value_name = "NAME")]
    pub penalty: Option<String>,
    /// Concavity parameter for mcp (default 3) and scad (default 3.7).
    #[arg(long, value_name = "G")]
    pub gamma: Option<f64>,
    /// Ridge weight for enet (required with it).
    #[arg(long, value_name = "L2")]
    pub lambda2: Option<f64>,
    /// Number of penalty levels on the grid (default 100).
    #[arg(long, value_name = "K")]
    pub nlambda: Option<usize>,
    /// Smallest lambda as a fraction of the largest (default 0.001, or 0.05
    /// when features outnumber observations).
    #[arg(long, value_name = "R")]
    pub lambda_min_ratio: Option<f64>,
    /// Stop the path once more than this many penalized features are active.
    #[arg(long, value_name = "M")]
    pub max_active: Option<usize>,
    /// Coordinate-descent sweep budget per lambda (default 10000).
    #[arg(long, value_name = "S")]
    pub max_sweeps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Output path (default fit.json); a .csv suffix writes a wide
    /// coefficient table instead of JSON.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MfdrCmd {
    /// Saved fit (JSON) to read instead of refitting from data.
    #[arg(long, value_name = "FILE")]
    pub fit: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Level for the reported smallest-lambda selection rule (default 0.1).
    #[arg(long, value_name = "A")]
    pub alpha: Option<f64>,
    /// Output table (default mfdr.csv): lambda, expected_false, selected,
    /// mfdr.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Plot-data file (default: the output path with a -plot suffix).
    #[arg(long, value_name = "FILE")]
    pub plot_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Number of cross-validation folds (default 10).
    #[arg(long, value_name = "K")]
    pub folds: Option<usize>,
    /// Fold-assignment seed; drawn from entropy and logged when absent.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Selection rule to report: min (default), 1se, or mfdr.
    #[arg(long, value_name = "RULE")]
    pub rule: Option<String>,
    /// Level for the mfdr rule (default 0.1).
    #[arg(long, value_name = "A")]
    pub alpha: Option<f64>,
    /// Output table (default cv.csv): lambda, selected, cv_error, cv_se.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// False discovery level shared by all three methods (default 0.1).
    #[arg(long, value_name = "A")]
    pub alpha: Option<f64>,
    /// Cap on stage-one selections in sample splitting (default 20).
    #[arg(long, value_name = "M")]
    pub screen_limit: Option<usize>,
    /// Seed for the sample split; drawn from entropy and logged when absent.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    /// Output table (default compare.csv), one row per method and feature.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// Builtin scenario name or a TOML scenario file. Builtins:
    /// linear-independent, linear-correlated, cox-censoring-independent,
    /// cox-censoring-linked, blocks-gaussian, blocks-binomial, blocks-cox.
    #[arg(long, value_name = "NAME|FILE")]
    pub scenario: Option<String>,
    /// Replications (default 200, or the scenario file's value).
    #[arg(long, value_name = "R")]
    pub reps: Option<usize>,
    /// Master seed; every replication derives its stream from it.
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    /// Level for the smallest-lambda rule and the comparator methods
    /// (default 0.1).
    #[arg(long, value_name = "A")]
    pub alpha: Option<f64>,
    /// Also run the univariate and sample-splitting comparators.
    #[arg(long)]
    pub comparators: bool,
    /// Use 1000 replications unless --reps overrides.
    #[arg(long)]
    pub full_scale: bool,
    /// Per-lambda aggregate table (default simulate.csv).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Per-method summary table (default: the output path with a -methods
    /// suffix).
    #[arg(long, value_name = "FILE")]
    pub methods_out: Option<PathBuf>,
}
