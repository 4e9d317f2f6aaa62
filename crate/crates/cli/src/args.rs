//! Command-line surface. Most flags are optional at parse time so a config
//! file can supply them; required-ness is enforced after the merge.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "projerase",
    version,
    about = "Erase a discrete concept from embeddings with learned orthogonal projections",
    propagate_version = true
)]
pub struct Cli {
    /// Config file of `key = value` lines supplying flag defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known concept structure.
    Generate(GenerateArgs),
    /// Learn an erasing projector from a labelled dataset.
    Train(TrainArgs),
    /// Apply a projector file to a dataset.
    Erase(EraseArgs),
    /// Train a classifier for a label column and report its accuracy.
    Probe(ProbeArgs),
    /// Minimum description length of a label column under online coding.
    Mdl(MdlArgs),
    /// Average k-nearest-neighbor overlap between two aligned datasets.
    Overlap(OverlapArgs),
    /// Spearman correlation of cosine similarities against human ratings.
    Similarity(SimilarityArgs),
    /// Train a task classifier and write its held-out predictions.
    Downstream(DownstreamArgs),
    /// Fairness metrics (TPR gaps, demographic parity) of a predictions file.
    Fairness(FairnessArgs),
    /// Rank, residuals, and singular-value spectrum of a projector file.
    Inspect(InspectArgs),
    /// Top-2 principal-component coordinates per sample, for plotting.
    PcaDump(PcaDumpArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Concept structure: `linear` (mean-encoded) or `nonlinear` (radial).
    #[arg(long)]
    pub kind: Option<String>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of concept classes (linear kind only).
    #[arg(long)]
    pub k: Option<usize>,
    /// Class-mean separation (linear kind only).
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output dataset CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// `standard` or `cascaded`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Input dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Rank of the learned projector.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Penalty coefficient c; the objective uses gamma = c / rank^2.
    #[arg(long = "gamma-c")]
    pub gamma_c: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate (drops 10x after half the epochs).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Samples per step, or `full`.
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable class-stratified minibatches.
    #[arg(long)]
    pub no_stratify: bool,
    /// Comma-separated kernel bandwidth multipliers.
    #[arg(long)]
    pub alphas: Option<String>,
    /// Fixed kernel bandwidth sigma^2 (default: per-batch mean heuristic).
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Output projector file.
    #[arg(long = "out-projector")]
    pub out_projector: Option<PathBuf>,
    /// Optional loss-trace CSV.
    #[arg(long = "out-trace")]
    pub out_trace: Option<PathBuf>,
}

#[derive(Args)]
pub struct EraseArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub projector: Option<PathBuf>,
    /// Output dataset CSV of projected embeddings.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Probe-training knobs shared by `probe`, `mdl`, and `downstream`.
#[derive(Args)]
pub struct ProbeCommonArgs {
    /// `mlp` (one hidden ReLU layer) or `linear` (logistic regression).
    #[arg(long)]
    pub kind: Option<String>,
    /// Hidden width of the MLP probe.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column to predict: `z` (concept) or `y` (task).
    #[arg(long)]
    pub target: Option<String>,
    /// Held-out fraction used for the reported accuracy.
    #[arg(long = "test-frac")]
    pub test_frac: Option<f64>,
    #[command(flatten)]
    pub probe: ProbeCommonArgs,
    /// Output report CSV (`metric,value`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MdlArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Label column to code: `z` (default) or `y`.
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated prefix sizes; defaults to geometric doubling.
    #[arg(long)]
    pub schedule: Option<String>,
    #[command(flatten)]
    pub probe: ProbeCommonArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OverlapArgs {
    /// Dataset before erasure.
    #[arg(long)]
    pub original: Option<PathBuf>,
    /// Dataset after erasure (same ids, same order).
    #[arg(long)]
    pub erased: Option<PathBuf>,
    /// Neighborhood size.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SimilarityArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// CSV of `id1,id2,score` rows.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DownstreamArgs {
    /// Dataset with task labels (usually erased embeddings).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long = "test-frac")]
    pub test_frac: Option<f64>,
    #[command(flatten)]
    pub probe: ProbeCommonArgs,
    /// Output predictions CSV (`id,y_true,y_pred,z`), consumed by `fairness`.
    #[arg(long = "out-predictions")]
    pub out_predictions: Option<PathBuf>,
    /// Optional metrics CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct FairnessArgs {
    /// Predictions CSV from `downstream`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub projector: Option<PathBuf>,
    /// Optional report CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PcaDumpArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output CSV of `id,z,pc1,pc2` rows.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
