mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "translens", version, about = "Memorization/generalization analysis for sequential recommendation test sets")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, env = "TRANSLENS_CONFIG")]
    pub config: Option<PathBuf>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build and cache the transition index of the training split.
    Index(IndexArgs),
    /// Label test instances and summarize category ratios.
    Attribute(AttributeArgs),
    /// Semantic-ID prefix memorization tables.
    Tokenmem(TokenmemArgs),
    /// Per-category NDCG/Recall breakdown from labels and predictions.
    Evaluate(EvaluateArgs),
    /// Quantile-binned tables keyed by support, phi/psi or MSP.
    Bins(BinsArgs),
    /// Fuse an ID model with a generative model.
    #[command(subcommand)]
    Ensemble(EnsembleCommand),
    /// Generate a synthetic corpus from a plant spec.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone)]
pub struct IngestArgs {
    /// Interactions file: `user TAB item,item,...`, chronological.
    #[arg(long)]
    pub interactions: PathBuf,
    /// Iterative k-core filter (0 disables).
    #[arg(long)]
    pub kcore: Option<usize>,
    /// Only these users are split into validation/test; the rest train.
    #[arg(long)]
    pub eval_users: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct AttrArgs {
    #[arg(long)]
    pub max_hop: Option<usize>,
    /// adjacent | any_gap
    #[arg(long)]
    pub match_mode: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// tsv | json
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitPart {
    Test,
    Validation,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub attr: AttrArgs,
    /// Index cache file to write.
    #[arg(long)]
    pub index: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct AttributeArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub attr: AttrArgs,
    /// Reuse this index cache, building it first if missing.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Write per-instance labels here.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitPart,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct TokenmemArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub attr: AttrArgs,
    /// Semantic-ID map: `item TAB tok,tok,...`.
    #[arg(long)]
    pub sid: PathBuf,
    /// Largest prefix length analysed (default: full length).
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Write token_memorization, token_reduction and token_instances here
    /// instead of printing the bucket table.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Label file from `attribute`.
    #[arg(long)]
    pub labels: PathBuf,
    /// `NAME=PATH`, repeatable.
    #[arg(long = "pred", required = true)]
    pub preds: Vec<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_hop: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinKey {
    Support,
    PhiPsi,
    Msp,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceFilter {
    All,
    Memorization,
    Generalization,
    Uncategorized,
}

#[derive(Args, Debug)]
pub struct BinsArgs {
    #[arg(long, value_enum)]
    pub key: BinKey,
    #[command(flatten)]
    pub ingest: IngestArgs,
    #[command(flatten)]
    pub attr: AttrArgs,
    /// Labels for the test split; computed when omitted.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Restrict the binned instances to one category.
    #[arg(long, value_enum, default_value = "all")]
    pub only: InstanceFilter,
    /// `NAME=PATH`, repeatable. For `msp` the first is the ID model.
    #[arg(long = "pred", required = true)]
    pub preds: Vec<String>,
    /// Semantic-ID map (support, phi-psi).
    #[arg(long)]
    pub sid: Option<PathBuf>,
    /// Prefix length for C_n and psi.
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct FusionArgs {
    /// adaptive | fixed
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha_static: Option<f64>,
    /// minmax | rank_reciprocal
    #[arg(long)]
    pub normalization: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ModelNames {
    #[arg(long, default_value = "ID")]
    pub id_name: String,
    #[arg(long, default_value = "GR")]
    pub gr_name: String,
}

#[derive(Subcommand, Debug)]
pub enum EnsembleCommand {
    /// Fuse two prediction files with one configuration.
    Run(EnsembleRunArgs),
    /// Grid-search q/tau and alpha_static on validation predictions.
    Tune(EnsembleTuneArgs),
}

#[derive(Args, Debug)]
pub struct EnsembleRunArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// ID-model predictions (probabilities).
    #[arg(long)]
    pub id_pred: PathBuf,
    /// Generative-model predictions.
    #[arg(long)]
    pub gr_pred: PathBuf,
    #[command(flatten)]
    pub names: ModelNames,
    #[command(flatten)]
    pub fusion: FusionArgs,
    /// Fused predictions output.
    #[arg(long)]
    pub fused: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitPart,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct EnsembleTuneArgs {
    #[command(flatten)]
    pub ingest: IngestArgs,
    /// Validation-split ID-model predictions.
    #[arg(long)]
    pub val_id_pred: PathBuf,
    /// Validation-split generative-model predictions.
    #[arg(long)]
    pub val_gr_pred: PathBuf,
    /// Test-split predictions; with both, the comparison table is emitted.
    #[arg(long, requires = "test_gr_pred")]
    pub test_id_pred: Option<PathBuf>,
    #[arg(long, requires = "test_id_pred")]
    pub test_gr_pred: Option<PathBuf>,
    #[command(flatten)]
    pub names: ModelNames,
    #[arg(long)]
    pub normalization: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub q_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub tau_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    /// Full grid with per-config validation NDCG, as JSON.
    #[arg(long)]
    pub grid_out: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Plant spec (TOML).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
