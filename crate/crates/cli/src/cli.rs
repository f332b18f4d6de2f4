use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Streaming CTR prediction benchmark.
///
/// Configuration precedence: built-in defaults, then the TOML file given
/// with `--config`/`--spec`, then command-line flags.
#[derive(Debug, Parser)]
#[command(name = "streamctr", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a raw log, build vocabularies and fix the stream schedule.
    Prepare(PrepareArgs),
    /// Pretrain and stream one configuration over a prepared dataset.
    Run(RunArgs),
    /// Run the cartesian product of swept parameters and compare cells.
    Sweep(SweepArgs),
    /// Correlations, trends and epoch-sweep tables over finished runs.
    Analyze(AnalyzeArgs),
    /// Write a synthetic drifting click log in the raw CSV layout.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Raw hour-stamped CSV log.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for manifest.json, vocab.json and samples.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with prepare settings (and an optional [format] table).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub pretrain_fraction: Option<f64>,
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
    /// Tokens seen fewer times map to the out-of-vocabulary index.
    #[arg(long)]
    pub min_count: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub prepared: PathBuf,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a dotted config path, e.g. `--set model.norm_mlp=bn`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub extras: RunExtras,
}

#[derive(Debug, Clone, Args, Default)]
pub struct RunExtras {
    /// Also run an epoch sweep with this many passes per hour.
    #[arg(long)]
    pub epoch_sweep: Option<usize>,
    /// Score every n-th timestamp in the epoch sweep.
    #[arg(long, default_value_t = 1)]
    pub sweep_stride: usize,
    /// Write a checkpoint every n streaming hours (plus M₀ and the final model).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub prepared: PathBuf,
    /// TOML sweep spec: `base` run config, `seeds`, and `[[axis]]` tables.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum number of cells run at once.
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Print the expanded grid and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Glob matching run directories or their summary.json files.
    #[arg(long = "runs", required = true)]
    pub patterns: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Destination CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hours: Option<usize>,
    #[arg(long)]
    pub samples_per_hour: Option<usize>,
}
