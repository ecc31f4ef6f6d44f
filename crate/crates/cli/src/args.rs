use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use vf_core::petri::Completion;
use vf_core::sampler::{DEFAULT_BURN_IN, DEFAULT_THINNING};
use vf_core::split::{BiasSetup, DEFAULT_LEAK_FRACTION};
use vf_core::SampleMode;

/// Generate and score process variants with sequence generators trained on
/// partial event logs.
#[derive(Debug, Parser)]
#[command(name = "vf", version, propagate_version = true)]
pub struct Cli {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

impl Cli {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the variant language of a Petri net.
    Playout(PlayoutArgs),
    /// Split a variant set into observed and held-out variants.
    Split(SplitArgs),
    /// Train a generator on an observed variant log.
    Train(TrainArgs),
    /// Draw variants from a trained generator.
    Sample(SampleArgs),
    /// Score a sample against the system language.
    Eval(EvalArgs),
    /// Run an experiment plan and write its report.
    Sweep(SweepArgs),
    /// Rebuild the report of a finished sweep from its records.
    Report(ReportArgs),
    /// Playout, split, train, sample and eval in one go.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompletionArg {
    Auto,
    FinalMarkings,
    DeadMarkings,
}

impl From<CompletionArg> for Completion {
    fn from(c: CompletionArg) -> Self {
        match c {
            CompletionArg::Auto => Completion::Auto,
            CompletionArg::FinalMarkings => Completion::FinalMarkings,
            CompletionArg::DeadMarkings => Completion::DeadMarkings,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlayoutOpts {
    /// Longest variant to enumerate.
    #[arg(long, default_value_t = 64)]
    pub max_length: usize,
    /// Cap on explored (marking, prefix) states.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_states: usize,
    /// Longest run of consecutive silent firings.
    #[arg(long, default_value_t = 50)]
    pub max_silent_chain: usize,
    #[arg(long, value_enum, default_value_t = CompletionArg::Auto)]
    pub completion: CompletionArg,
}

#[derive(Debug, Args, Serialize)]
pub struct PlayoutArgs {
    /// Net file (`.pnml` or `.json`).
    #[arg(long)]
    pub net: PathBuf,
    #[command(flatten)]
    pub opts: PlayoutOpts,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct SetupOpts {
    /// Random split observing this share of the variants.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Length-biased split (b1, b2, b3 or b4).
    #[arg(long)]
    pub bias: Option<BiasSetup>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitOpts {
    #[command(flatten)]
    pub setup: SetupOpts,
    /// Allow random splits that hold out every longest variant.
    #[arg(long)]
    pub no_enforce_max_length: bool,
    /// Share of held-out variants swapped by the leaky setups.
    #[arg(long, default_value_t = DEFAULT_LEAK_FRACTION)]
    pub leak_fraction: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    /// System variant file.
    #[arg(long)]
    pub variants: PathBuf,
    /// System name recorded in the split (defaults to the file stem).
    #[arg(long)]
    pub system: Option<String>,
    #[command(flatten)]
    pub opts: SplitOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Gan,
    Markov,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainOpts {
    #[arg(long, value_enum, default_value_t = GeneratorKind::Gan)]
    pub generator: GeneratorKind,
    /// JSON generator configuration; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the small configuration instead of the default one.
    #[arg(long)]
    pub small: bool,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub adversarial_learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Context length of the Markov generator.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Additive smoothing of the Markov generator.
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Observed variant file.
    #[arg(long)]
    pub variants: PathBuf,
    #[command(flatten)]
    pub opts: TrainOpts,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleOpts {
    #[arg(long, default_value_t = SampleMode::Naive)]
    pub mode: SampleMode,
    /// Number of draws.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long = "thin", default_value_t = DEFAULT_THINNING)]
    pub thinning: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    /// Generator checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub opts: SampleOpts,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Sampled variant file; its `.meta.json` sidecar is read when present.
    #[arg(long)]
    pub sampled: PathBuf,
    /// System variant file.
    #[arg(long)]
    pub system: PathBuf,
    /// Held-out variant file.
    #[arg(long)]
    pub heldout: PathBuf,
    /// Split summary providing the system name and setup label.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// System name (defaults to the split summary, then the file stem).
    #[arg(long)]
    pub system_id: Option<String>,
    #[arg(long)]
    pub setup: Option<String>,
    /// Temperature recorded in the row when the sidecar has none.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Experiment plan (JSON).
    #[arg(long)]
    pub plan: PathBuf,
    /// Directory holding the ground-truth nets.
    #[arg(long, env = "VF_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// `records.json` written by a sweep.
    #[arg(long)]
    pub records: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// System name (defaults to the net's file stem).
    #[arg(long)]
    pub system: Option<String>,
    #[command(flatten)]
    pub playout: PlayoutOpts,
    #[command(flatten)]
    pub split: SplitOpts,
    #[command(flatten)]
    pub train: TrainOpts,
    #[command(flatten)]
    pub sample: SampleOpts,
}
