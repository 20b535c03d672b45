//! `fluxmp` command-line driver: argument grammar, configuration and the
//! on-disk formats shared by all subcommands.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod io;

pub use config::{load_config, RunConfig};
pub use io::{read_flux_csv, write_flux_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] fluxmp_core::Error),
}

impl CliError {
    pub fn file(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::File {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::File { .. } => EXIT_DATA,
            CliError::Core(e) => match e.kind() {
                fluxmp_core::ErrorKind::Data => EXIT_DATA,
                fluxmp_core::ErrorKind::Numerical => EXIT_NUMERICAL,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "fluxmp",
    version,
    about = "Flux estimation on directed factor graphs",
    after_help = "Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numerical failure."
)]
pub struct Cli {
    /// Worker threads; outputs do not depend on it [default: all cores]
    #[arg(long, global = true, env = "FLUXMP_THREADS")]
    pub threads: Option<usize>,

    /// Master random seed [default: 42]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// TOML run configuration; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Override any configuration key, e.g. `--set train.lr=0.01` (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a graph document and print its summary
    Validate(ValidateArgs),
    /// Generate a synthetic dataset directory
    Simulate(SimulateArgs),
    /// Balance flux rows with MPO or BRW
    Balance(BalanceArgs),
    /// Train the per-variable network ensemble on a dataset
    Train(TrainArgs),
    /// Predict flux from a checkpoint
    Predict(PredictArgs),
    /// Score predictions and write report.json
    Evaluate(EvaluateArgs),
    /// Compare MPO and BRW under orthogonal noise across gamma levels
    NoiseBench(NoiseBenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mpo,
    Brw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rules {
    /// Current-weight messages, rectified factor answers, backtracking
    Default,
    /// Blended messages, absolute factor answers, fixed blend rate
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Eta {
    Uniform,
    ImbalanceWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Nlf {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Arch {
    Main,
    Appendix,
}

/// MPO flags shared by `balance`, `simulate` and `noise-bench`.
#[derive(Debug, Clone, Default, Args)]
pub struct MpoArgs {
    /// Blend rate in (0, 1] [default: 0.5]
    #[arg(long)]
    pub beta: Option<f64>,
    /// L1 imbalance stop threshold [default: 1e-6]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// MPO epoch cap [default: 10000]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Factor weighting [default: uniform]
    #[arg(long, value_enum)]
    pub eta: Option<Eta>,
    /// Message rules [default: default]
    #[arg(long, value_enum)]
    pub rules: Option<Rules>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Graph JSON document
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Optional flux CSV whose rows are checked for balance
    #[arg(long)]
    pub flux: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Graph JSON document (exclusive with --graph-spec)
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Generate a graph: factors,variables,cycles (e.g. 6,10,0)
    #[arg(long, value_name = "N,K,C")]
    pub graph_spec: Option<String>,
    /// Features per variable for generated graphs: min,max [default: 3,6]
    #[arg(long, value_name = "MIN,MAX")]
    pub features: Option<String>,
    /// Number of samples [default: 500]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Link function [default: 1]
    #[arg(long, value_enum)]
    pub nlf: Option<Nlf>,
    /// Fraction of observation entries zeroed [default: 0.2]
    #[arg(long)]
    pub sparsity: Option<f64>,
    /// Floor for ground-truth flux entries, 0 disables lifting [default: 0.1]
    #[arg(long)]
    pub min_flux: Option<f64>,
    /// Train,val,test fractions [default: 0.6,0.2,0.2]
    #[arg(long, value_name = "TRAIN,VAL,TEST")]
    pub split: Option<String>,
    #[command(flatten)]
    pub mpo: MpoArgs,
    /// Output dataset directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BalanceArgs {
    /// Graph JSON document
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Input flux CSV (header = variable names)
    #[arg(long)]
    pub flux: Option<PathBuf>,
    /// Balancing method [default: mpo]
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[command(flatten)]
    pub mpo: MpoArgs,
    /// BRW sweeps [default: 1]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Balanced flux CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// MPO trace CSV (sample, epoch, l1_imbalance) [default: <out>_trace.csv]
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Dataset directory
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Output model directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Epoch cap [default: 500]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Adam learning rate [default: 0.05]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Anchor loss weight, 0 disables MPO projection [default: 1]
    #[arg(long)]
    pub lambda_anchor: Option<f64>,
    /// L2 weight penalty [default: 1e-4]
    #[arg(long)]
    pub lambda_l2: Option<f64>,
    /// Gate activity penalty [default: 1e-3]
    #[arg(long)]
    pub lambda_gate: Option<f64>,
    /// Epochs between MPO projections [default: 10]
    #[arg(long)]
    pub mpo_every: Option<usize>,
    /// Early-stopping patience in epochs [default: 30]
    #[arg(long)]
    pub patience: Option<usize>,
    /// Network architecture [default: main]
    #[arg(long, value_enum)]
    pub arch: Option<Arch>,
    /// Dropout rate [default: 0.5]
    #[arg(long)]
    pub dropout: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    /// checkpoint.bin written by `train`
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dataset directory supplying the graph and observations
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Predicted flux CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Dataset directory supplying graph, truth and split
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Graph JSON, when no dataset is given
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Predicted flux CSV
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Ground-truth flux CSV, overriding the dataset's
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Rows to score [default: test with a dataset, all otherwise]
    #[arg(long, value_enum)]
    pub split: Option<SplitName>,
    /// Also report Pearson r and p between predicted and true flux of this variable
    #[arg(long, value_name = "VARIABLE")]
    pub pearson: Option<String>,
    /// Report path [default: report.json next to --pred]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct NoiseBenchArgs {
    /// Graph JSON document (exclusive with --graph-spec)
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Generate a graph: factors,variables,cycles
    #[arg(long, value_name = "N,K,C")]
    pub graph_spec: Option<String>,
    /// Comma-separated noise levels [default: 0.1,0.3,...,2.9]
    #[arg(long)]
    pub gammas: Option<String>,
    /// Seeds per gamma, counted up from --seed [default: 20]
    #[arg(long)]
    pub seeds: Option<usize>,
    /// BRW sweeps [default: 1]
    #[arg(long)]
    pub brw_epochs: Option<usize>,
    #[command(flatten)]
    pub mpo: MpoArgs,
    /// Output CSV (gamma, seed, cos_noisy, cos_mpo, cos_brw)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run_cli`] with explicit output streams.
pub fn run_cli_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match commands::dispatch(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
