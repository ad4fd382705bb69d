use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "viewvec", version, about = "Multi-view graph-record embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with planted class structure.
    Synth(SynthArgs),
    /// Print the rooted-subgraph tokens of every record.
    Extract(ExtractArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Write the record embeddings of a checkpoint as TSV.
    Export(ExportArgs),
    /// Embed new records against a trained online-mode checkpoint.
    Embed(EmbedArgs),
    /// k-means clustering scored by the adjusted Rand index.
    EvalCluster(EvalClusterArgs),
    /// Logistic-regression classification scored by precision, recall and F1.
    EvalClassify(EvalClassifyArgs),
    /// Link prediction on a recommendation graph scored by ROC AUC.
    EvalLink(EvalLinkArgs),
    /// Print vocabulary sizes and the most frequent tokens per view.
    InspectVocab(InspectVocabArgs),
    /// Fold new records into a checkpoint's noise distributions.
    RebuildNoise(RebuildNoiseArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON synthesis config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `record_id,label` ground truth here.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub alphabet: Option<usize>,
    #[arg(long)]
    pub out_degree: Option<usize>,
    #[arg(long)]
    pub strength: Option<f64>,
    #[arg(long)]
    pub label_fraction: Option<f64>,
    /// Which classes each view carries signal for, e.g. `api=0,1;perm=1,2`.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<String>>,
    #[arg(long, default_value_t = 2)]
    pub max_degree: usize,
    /// Append the online-mode hashed id of each token.
    #[arg(long)]
    pub hashed: bool,
    #[arg(long, default_value_t = viewvec_core::vocab::DEFAULT_ONLINE_CAPACITY)]
    pub capacity: u64,
    /// Only this record.
    #[arg(long)]
    pub record: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NegativeModeArg {
    ViewSpecific,
    Global,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VocabArg {
    Dictionary,
    Online,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run config; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Also write record embeddings as TSV.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Views to train on; a single view selects single-view training.
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long)]
    pub hashes: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub alpha_min: Option<f64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub label_weight: Option<f64>,
    #[arg(long, value_enum)]
    pub negative_mode: Option<NegativeModeArg>,
    #[arg(long, value_enum)]
    pub vocab: Option<VocabArg>,
    #[arg(long)]
    pub exclude_context: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// JSONL records; `-` reads standard input.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Leave output layers untouched.
    #[arg(long)]
    pub freeze: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Views the input may contain; graphs of views the model was not
    /// trained on are ignored.
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the updated model (with the new rows) here.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalInput {
    /// TSV embeddings as written by `export` or `embed`.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// JSON run config; its `eval` section supplies defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalClusterArgs {
    #[command(flatten)]
    pub input: EvalInput,
    /// `record_id,label` ground truth.
    #[arg(long)]
    pub labels: PathBuf,
    /// Number of clusters; defaults to the number of distinct labels.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalClassifyArgs {
    #[command(flatten)]
    pub input: EvalInput,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Positive class for binary problems.
    #[arg(long)]
    pub positive: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalLinkArgs {
    #[command(flatten)]
    pub input: EvalInput,
    /// Edge list, one `id1<TAB>id2` per line.
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long)]
    pub remove_fraction: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub negative_ratio: Option<f64>,
}

#[derive(Debug, Args)]
pub struct InspectVocabArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct RebuildNoiseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<String>>,
    /// Defaults to overwriting `--checkpoint`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
