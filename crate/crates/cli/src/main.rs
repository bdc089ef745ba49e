//! Command-line front end for the latent-space sensor data anonymizer.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "latent-anon",
    version,
    about = "Anonymize windowed sensor data in a VAE latent space"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Window, label, split and normalize a dataset into embedding archives.
    Prepare(PrepareArgs),
    /// Train one VAE per public class plus the attribute classifiers.
    Train(TrainArgs),
    /// Grid-search α and β by mean final training loss.
    Gridsearch(GridArgs),
    /// Compute the mean latent table from the training split.
    Means(MeansArgs),
    /// Anonymize an archive split or a sample stream.
    Anonymize(AnonymizeArgs),
    /// Run the re-identification attack.
    Attack(AttackArgs),
    /// Classifier accuracy before and after anonymization.
    Eval(EvalArgs),
    /// Per-stage latency against the real-time budget.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct PrepareArgs {
    /// Dataset root (not needed for the synthetic schema).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Preset name (synthetic, motionsense, mobiact, mobiact-weight) or a JSON schema file.
    #[arg(long, default_value = "synthetic")]
    pub schema: String,
    /// JSON overrides for the synthetic generator.
    #[arg(long)]
    pub synth: Option<PathBuf>,
    /// Window length in samples [default: 32 synthetic, 128 otherwise].
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Share of subjects used for training when the schema has no test trials.
    #[arg(long, default_value_t = 0.8)]
    pub fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub latent_dim: usize,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "64,32")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Where model files and training curves go.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long = "alpha", value_delimiter = ',', default_value = "0.5,1,2,3")]
    pub alphas: Vec<f64>,
    #[arg(long = "beta", value_delimiter = ',', default_value = "1,2,3,4")]
    pub betas: Vec<f64>,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct MeansArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    /// Output table file [default: <out>/means.zbar].
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[value(alias = "deterministic")]
    Det,
    #[value(alias = "probabilistic")]
    Prob,
    Identity,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    Sampled,
    Mean,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flip {
    Mapping,
    UniformOther,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct PipelineArgs {
    #[arg(long)]
    pub archive: PathBuf,
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Det)]
    pub mode: Mode,
    /// Latent sampling: fresh noise or the posterior mean.
    #[arg(long, value_enum, default_value_t = Noise::Sampled)]
    pub noise: Noise,
    /// Target of a probabilistic flip with more than two private classes.
    #[arg(long, value_enum, default_value_t = Flip::Mapping)]
    pub flip_target: Flip,
    /// Private-class mapping, comma separated [default: i → (i+1) mod M].
    #[arg(long, value_delimiter = ',')]
    pub mapping: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Args, Debug, Serialize)]
pub struct AnonymizeArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
    /// Read raw samples (one per line) from this file, or `-` for stdin,
    /// instead of an archive split.
    #[arg(long)]
    pub stream: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct AttackArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long, default_value_t = 0.2)]
    pub fraction: f64,
    #[arg(long, default_value_t = 20)]
    pub runs: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Sampling rate in Hz [default: from the manifest].
    #[arg(long)]
    pub rate: Option<f64>,
    /// Window stride in samples [default: from the manifest].
    #[arg(long)]
    pub stride: Option<usize>,
    /// Group size; 1 times single embeddings.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Cap on the number of test embeddings timed.
    #[arg(long, default_value_t = 1000)]
    pub limit: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("LATENT_ANON_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| anyhow::anyhow!("LATENT_ANON_THREADS must be a positive integer, got {v:?}"))?;
        anyhow::ensure!(n > 0, "LATENT_ANON_THREADS must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Prepare(a) => commands::prepare(&a),
        Command::Train(a) => commands::train(&a),
        Command::Gridsearch(a) => commands::gridsearch(&a),
        Command::Means(a) => commands::means(&a),
        Command::Anonymize(a) => commands::anonymize(&a),
        Command::Attack(a) => commands::attack(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Bench(a) => commands::bench(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
