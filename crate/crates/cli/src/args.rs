use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "icad",
    version,
    about = "Conformal out-of-distribution detection on synthetic camera streams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset of synthetic frames.
    GenData(GenData),
    /// Train a variational autoencoder.
    TrainVae(TrainVae),
    /// Train a deep SVDD model.
    TrainSvdd(TrainSvdd),
    /// Score a calibration set and store the sorted scores.
    Calibrate(Calibrate),
    /// Stream a dataset through a detector.
    Detect(Detect),
    /// Run a suite of synthetic drift episodes.
    Simulate(Simulate),
    /// Grid-search detector thresholds on a suite of episodes.
    Tune(Tune),
    /// Time detector steps for several window sizes.
    Bench(Bench),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Vae,
    Svdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScorerArg {
    Vae,
    Svdd,
    Knn,
    Kde,
}

#[derive(Debug, Args)]
pub struct GenData {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: usize,
    /// Pixels per frame; must be a perfect square.
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 20.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainCommon {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Epochs of the first phase.
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    /// Epochs of the fine-tuning phase.
    #[arg(long, default_value_t = 100)]
    pub fine_tune_epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Fine-tuning learning rate.
    #[arg(long, default_value_t = 1e-4)]
    pub lr2: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [64, 32])]
    pub hidden: Vec<usize>,
    /// Loss-curve CSV; defaults to `<out>.loss.csv`.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainVae {
    #[command(flatten)]
    pub common: TrainCommon,
    #[arg(long, default_value_t = 8)]
    pub latent: usize,
}

#[derive(Debug, Args)]
pub struct TrainSvdd {
    #[command(flatten)]
    pub common: TrainCommon,
    /// Representation size.
    #[arg(long, default_value_t = 8)]
    pub rep: usize,
    /// Weight-decay coefficient of the objective.
    #[arg(long, default_value_t = 1e-6)]
    pub lambda: f64,
    /// Pretrain a mirrored autoencoder and copy its encoder.
    #[arg(long)]
    pub pretrain: bool,
    /// SVDD epochs after pretraining; defaults to `--epochs`.
    #[arg(long)]
    pub svdd_epochs: Option<usize>,
    /// SVDD fine-tuning epochs; defaults to `--fine-tune-epochs`.
    #[arg(long)]
    pub svdd_fine_tune_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Calibrate {
    /// Trained model (vae and svdd scorers).
    #[arg(long, conflicts_with = "train_data")]
    pub model: Option<PathBuf>,
    /// Proper training set (knn and kde scorers).
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    #[arg(long)]
    pub cal_data: PathBuf,
    #[arg(long, value_enum)]
    pub scorer: ScorerArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Uniform KDE bandwidth; Silverman's rule when absent.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Sampled reconstructions per calibration example (vae); the noise-free
    /// mean reconstruction is used when absent.
    #[arg(long)]
    pub cal_samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct Detect {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub cal: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Samples per input (vae) or window length (svdd).
    #[arg(long = "N", default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    #[arg(long, default_value_t = 6.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 14.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Diagnostics CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// Settings shared by the episode commands. Anything not given on the command
/// line is read from `--config`, then falls back to the default.
#[derive(Debug, Args)]
pub struct EpisodeArgs {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// key=value file with any of: method, model, cal, N, delta, tau, seed,
    /// max_steps, episodes.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub cal: Option<PathBuf>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Args)]
pub struct Simulate {
    #[command(flatten)]
    pub episode: EpisodeArgs,
    /// Total episodes, split evenly (the odd one is OOD).
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Output directory: metrics.csv plus one diagnostics CSV per episode.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Tune {
    #[command(flatten)]
    pub episode: EpisodeArgs,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// `delta=lo:hi:count,tau=lo:hi:count`.
    #[arg(long, default_value = "delta=0:100:101,tau=0:300:301")]
    pub grid: String,
    /// Grid CSV; the selected point is also written to `<out>.config`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Bench {
    #[command(flatten)]
    pub episode: EpisodeArgs,
    #[arg(long = "N-list", value_delimiter = ',', default_values_t = [5, 10, 20])]
    pub n_list: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}
