//! `vimm`: synthetic data, overlap investigation, augmentation, training,
//! evaluation and hyper-parameter sweeps.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use vimm_core::augment::{Ablation, Strategy};
use vimm_core::pipeline::StatsScope;
use vimm_core::recsys::{BprSource, ItemInit, Normalization};
use vimm_core::stats::OverlapDenominator;

#[derive(Debug, Parser)]
#[command(
    name = "vimm",
    version,
    about = "Similarity-aware virtual interactions for multimodal recommendation"
)]
pub struct Cli {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads (0 = one per core). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Output directory; defaults to `<runs-root>/<command>-<hash>-<time>`.
    #[arg(long, global = true, value_name = "DIR")]
    run_dir: Option<PathBuf>,

    #[arg(long, global = true, default_value = "runs", value_name = "DIR")]
    runs_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a clustered synthetic dataset.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Overlap statistics and modality weights for several k.
    #[command(args_override_self = true)]
    Investigate(InvestigateArgs),
    /// Build and store the augmented interaction matrix.
    #[command(args_override_self = true)]
    Augment(AugmentArgs),
    /// Train the recommender on the real or a stored augmented matrix.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Evaluate a checkpoint: overall, per sparsity group, or cold start.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Grid search over lambda and k.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 300)]
    pub users: usize,
    #[arg(long, default_value_t = 500)]
    pub items: usize,
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    #[arg(long, default_value_t = 10)]
    pub per_user: usize,
    /// Modalities as `name:dim` pairs.
    #[arg(long, default_value = "text:32,visual:64", value_delimiter = ',', value_parser = parse_dims)]
    pub dims: Vec<(String, usize)>,
    #[arg(long, default_value_t = 0.2)]
    pub affinity_noise: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset directory: `interactions.tsv` plus one `<modality>.emb` per modality.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Representation noise level (variances 0, 1e-6, 1e-5, 1e-4).
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=3))]
    pub noise_level: u8,
    /// Information error level (swap probabilities 0, 1%, 3%, 5%).
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=3))]
    pub error_level: u8,
    #[arg(long, default_value_t = 0)]
    pub perturb_seed: u64,
    /// Fraction of items stripped of all training interactions (cold start).
    #[arg(long, default_value_t = 0.0)]
    pub holdout: f64,
    #[arg(long, default_value_t = 0)]
    pub holdout_seed: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, default_value_t = OverlapDenominator::Real)]
    pub overlap_denominator: OverlapDenominator,
    /// Measure overlaps on the training split or on all interactions.
    #[arg(long, default_value_t = StatsScope::Train)]
    pub stats_scope: StatsScope,
}

#[derive(Debug, Args)]
pub struct InvestigateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub stats: StatsArgs,
    /// Directory for reusable neighbor-table dumps.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, default_value = "5,10,20", value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Also estimate O_avg by random placement with this many trials.
    #[arg(long, default_value_t = 0)]
    pub montecarlo_trials: usize,
    #[arg(long, default_value_t = 0)]
    pub montecarlo_seed: u64,
}

#[derive(Debug, Args)]
pub struct AugmentOptions {
    #[arg(long, default_value_t = Strategy::Overlay)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 1e-2)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = Ablation::None)]
    pub ablation: Ablation,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub stats: StatsArgs,
    #[command(flatten)]
    pub augment: AugmentOptions,
    /// Directory for reusable neighbor-table dumps.
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainOptions {
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 2048)]
    pub batch_size: usize,
    #[arg(long = "lr", default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long = "reg", default_value_t = 1e-4)]
    pub regularization: f64,
    /// Epochs without validation improvement before stopping (0 = never).
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = Normalization::Paper)]
    pub norm: Normalization,
    /// `real`, or `threshold:<x>` to also use augmented entries with weight >= x.
    #[arg(long, default_value_t = BprSource::Real)]
    pub bpr_source: BprSource,
    /// `features` projects modality embeddings; `random` reads no embeddings.
    #[arg(long, default_value_t = ItemInit::Features)]
    pub item_init: ItemInit,
    /// Cutoff K for Recall@K and NDCG@K.
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainOptions,
    /// Stored augmented matrix to propagate over instead of the real one.
    #[arg(long, value_name = "FILE")]
    pub adjacency: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Sparsity groups by training interaction count.
    #[arg(long, default_value = "1-5,6-10,11-20,21+")]
    pub groups: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub stats: StatsArgs,
    #[command(flatten)]
    pub train: TrainOptions,
    #[arg(long, default_value_t = Strategy::Overlay)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = Ablation::None)]
    pub ablation: Ablation,
    #[arg(long, default_value = "0.001,0.005,0.01,0.05", value_delimiter = ',')]
    pub lambdas: Vec<f64>,
    #[arg(long, default_value = "5,10,20", value_delimiter = ',')]
    pub ks: Vec<usize>,
}

fn parse_dims(s: &str) -> Result<(String, usize), String> {
    let (name, dim) = s
        .split_once(':')
        .ok_or_else(|| format!("expected name:dim, got {s:?}"))?;
    let dim: usize = dim.parse().map_err(|_| format!("bad dimension in {s:?}"))?;
    if name.is_empty() || dim == 0 {
        return Err(format!("bad modality {s:?}"));
    }
    Ok((name.to_string(), dim))
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {}", e.0);
            return ExitCode::from(2);
        }
    };
    let matches = match Cli::command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => e.exit(),
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut entries = config::resolved(name, sub);
    entries.extend(config::resolved(name, &matches).into_iter().skip(1));
    entries.sort();
    entries.dedup();

    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let run_dir = match config::make_run_dir(cli.run_dir.as_deref(), &cli.runs_root, name, &entries) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("error: cannot create run directory: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| commands::run(&cli.command, &run_dir)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
