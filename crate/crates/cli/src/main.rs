//! `gclss`: data generation, training, sweeps and the seriation/selection
//! tools from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 computation error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] gclss_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Compute(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gclss", version, about = "Spectral-seriation semi-supervised regression toolkit")]
pub struct Cli {
    /// TOML file with [data], [train] and [experiment] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Increase log verbosity (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the SPDE regression dataset and a labeled/unlabeled split.
    GenData(GenDataArgs),
    /// Train one model on a generated dataset.
    Train(TrainArgs),
    /// Compare the semi-supervised method against the supervised baseline.
    Experiment(ExperimentArgs),
    /// Rank the rows of a similarity matrix.
    Seriate(SeriateArgs),
    /// Choose a low-variance subset from a variance matrix.
    Select(SelectArgs),
    /// Perturbation tolerance of a mixed similarity matrix.
    Bound(BoundArgs),
    /// Perturb random mixed instances and count ranking changes.
    RobustnessSweep(RobustnessArgs),
    /// Run the synthetic subset-selection experiment.
    ToyDp(ToyDpArgs),
    /// Score a saved model on a dataset subset.
    Eval(EvalArgs),
}

#[derive(Debug, Args, Default)]
pub struct SplitFlags {
    /// Training pool size (labeled + unlabeled).
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub val_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Total number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub labeled_frac: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub length_scale: Option<f64>,
    #[arg(long)]
    pub forcing: Option<f64>,
    #[arg(long)]
    pub label_point: Option<f64>,
    #[command(flatten)]
    pub split: SplitFlags,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    /// Epoch budget preset: paper (100000) or fast (20000).
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub lambda_sc: Option<f64>,
    #[arg(long)]
    pub lambda_uc: Option<f64>,
    #[arg(long)]
    pub lambda_ur: Option<f64>,
    /// Blackbox interpolation step for the ranking loss.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub unlabeled_batch: Option<usize>,
    #[arg(long)]
    pub anchors: Option<usize>,
    /// Unlabeled rows kept by the selection module.
    #[arg(long)]
    pub budget: Option<usize>,
    /// fiedler or label-ranks.
    #[arg(long)]
    pub anchor_mode: Option<String>,
    #[arg(long)]
    pub eval_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory written by gen-data.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Re-split with this labeled fraction instead of using the saved split.
    #[arg(long)]
    pub labeled_frac: Option<f64>,
    #[command(flatten)]
    pub split: SplitFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Disable the auxiliary losses.
    #[arg(long)]
    pub supervised: bool,
    /// Write checkpoints here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000, requires = "checkpoint")]
    pub checkpoint_every: usize,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Metric log CSV (step, train_loss, val_mae, val_r2).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Save the trained model as JSON.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Labeled fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub split: SplitFlags,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeriateArgs {
    /// Similarity matrix as CSV or JSON {"n", "data"}.
    pub matrix: PathBuf,
    /// Number of leading labeled rows.
    #[arg(long, requires = "labels")]
    pub labeled: Option<usize>,
    /// Labels of the labeled rows, one per line or comma separated.
    #[arg(long, requires = "labeled")]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = "fiedler")]
    pub anchor_mode: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Variance matrix as CSV.
    pub matrix: PathBuf,
    #[arg(long)]
    pub budget: usize,
    /// Also solve exactly by enumeration.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Mixed similarity matrix as CSV or JSON.
    pub matrix: PathBuf,
    #[arg(long)]
    pub labeled: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    /// Random instances to test.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Perturbations per instance.
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Perturbation size as a multiple of the tolerance.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 4)]
    pub labeled: usize,
    #[arg(long, default_value_t = 5)]
    pub unlabeled: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Plant two unlabeled rows with nearly equal labels.
    #[arg(long)]
    pub near_tie: bool,
    #[arg(long, default_value = "label-ranks")]
    pub anchor_mode: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ToyDpArgs {
    /// Number of seeds.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    /// Also run the exhaustive search.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub sigma_base: Option<f64>,
    #[arg(long)]
    pub sigma_step: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model JSON written by `train --model-out`.
    #[arg(long)]
    pub model: PathBuf,
    /// test, val, labeled, unlabeled or all.
    #[arg(long, default_value = "test")]
    pub subset: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("GCLSS_THREADS") else { return Ok(()) };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| CliError::Usage(format!("GCLSS_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match init_threads().and_then(|()| commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
