use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use zsl_core::train::LossMode;
use zsl_core::zeroshot::Setting;

#[derive(Debug, Parser)]
#[command(name = "zsl", version, about = "Zero-shot classifier synthesis with graph convolutional networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic zero-shot task.
    Synth(SynthArgs),
    /// Keep the part of a knowledge graph within reach of the seed classes.
    ExtractSubgraph(ExtractArgs),
    /// Train a GCN that predicts classifiers from word embeddings.
    Train(TrainArgs),
    /// Score images with the classifiers predicted by a checkpoint.
    Eval(EvalArgs),
    /// Evaluate the ConSE baseline.
    Conse(ConseArgs),
    /// Sweep an ablation parameter and write a CSV.
    #[command(subcommand)]
    Ablate(AblateCommand),
    /// Distances from predicted classifiers to nearby training classifiers.
    AnalyzeDistances(DistanceArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 60)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.15)]
    pub unseen_frac: f64,
    #[arg(long, default_value_t = 16)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 24)]
    pub classifier_dim: usize,
    #[arg(long, default_value_t = 30)]
    pub images_per_class: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Embedding noise relative to a unit prototype.
    #[arg(long, default_value_t = 3.0)]
    pub embed_noise: f64,
    /// Image feature noise relative to a unit prototype.
    #[arg(long, default_value_t = 0.3)]
    pub feature_noise: f64,
    /// Edges added on top of the random spanning tree.
    #[arg(long, default_value_t = 20)]
    pub extra_edges: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub min_confidence: f64,
    #[arg(long, default_value_t = 7)]
    pub max_hops: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Graph, embeddings and split shared by every command that builds a task.
#[derive(Debug, Args, Serialize)]
pub struct GraphInputs {
    /// Directory holding `nodes.tsv` and `edges.tsv`.
    #[arg(long)]
    pub graph_dir: PathBuf,
    /// Word vectors in GloVe text format.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Newline-separated names of the seen (training) classes.
    #[arg(long)]
    pub seen_list: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub min_confidence: f64,
    /// What to do with class names that have no embedding.
    #[arg(long, default_value = "partial-average", value_parser = ["fail", "zero", "partial-average"])]
    pub missing_policy: String,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizerArgs {
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0005)]
    pub wd: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub inputs: GraphInputs,
    /// Ground-truth classifiers (ZSLM) with a `<stem>.json` sidecar naming the rows.
    #[arg(long)]
    pub gt_classifiers: Option<PathBuf>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "2048,2048,1024,1024,512")]
    pub dims: Vec<usize>,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    #[arg(long, default_value = "regression")]
    pub loss_mode: LossMode,
    /// Write a checkpoint every this many epochs (0 writes only the final one).
    #[arg(long, default_value_t = 50)]
    pub checkpoint_every: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TestImages {
    /// Image features (ZSLM) with a `<stem>.json` sidecar holding class-name labels.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value = "unseen")]
    pub setting: Setting,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20")]
    pub ks: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Checkpoint directory (or its manifest.json).
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub inputs: GraphInputs,
    #[command(flatten)]
    pub images: TestImages,
    /// Ground-truth classifiers used for seen classes in the generalized setting.
    #[arg(long)]
    pub gt_classifiers: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ConseArgs {
    #[command(flatten)]
    pub inputs: GraphInputs,
    #[command(flatten)]
    pub images: TestImages,
    #[arg(long, default_value_t = 10)]
    pub top_t: usize,
    /// Seen-class probabilities (ZSLM, images × seen classes in seen-list order).
    #[arg(long, conflicts_with = "gt_classifiers")]
    pub probs: Option<PathBuf>,
    /// Seen ground-truth classifiers, turned into probabilities by a tempered softmax.
    #[arg(long, required_unless_present = "probs")]
    pub gt_classifiers: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub temperature: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AblateCommand {
    /// Hit@k as a growing fraction of edges is removed.
    DropEdges(DropEdgesArgs),
    /// Hit@k for models of different depth.
    Depth(DepthArgs),
    /// Hit@k on a star or random graph in place of the real one.
    Trivial(TrivialArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct AblateCommon {
    #[command(flatten)]
    pub inputs: GraphInputs,
    #[arg(long)]
    pub gt_classifiers: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20")]
    pub ks: Vec<usize>,
    /// Training seeds; hits are averaged over them. Graph randomness follows the seed.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.0005)]
    pub wd: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    /// Divide every hidden width by this factor.
    #[arg(long, default_value_t = 1)]
    pub width_divisor: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DropEdgesArgs {
    #[command(flatten)]
    pub common: AblateCommon,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2,0.25,0.3,0.35,0.4,0.45,0.5")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 6)]
    pub layers: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DepthArgs {
    #[command(flatten)]
    pub common: AblateCommon,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6")]
    pub layers: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrivialKind {
    Star,
    Random,
}

#[derive(Debug, Args, Serialize)]
pub struct TrivialArgs {
    #[command(flatten)]
    pub common: AblateCommon,
    #[arg(long, value_enum)]
    pub kind: TrivialKind,
    #[arg(long, default_value_t = 6)]
    pub layers: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct DistanceArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub inputs: GraphInputs,
    /// Classifiers of the training classes.
    #[arg(long)]
    pub gt_classifiers: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub max_hops: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}
