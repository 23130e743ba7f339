use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rareval::{ApDepth, CountDepth, RarityVariant, DEFAULT_SEED};

pub const DEFAULT_ALPHAS: &str = "0,0.25,0.5,0.75,1";

#[derive(Parser, Debug)]
#[command(name = "rareval", version, about = "Rareness-weighted retrieval evaluation and meta-evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads (overrides RAREVAL_THREADS).
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,

    /// Emit JSON with full-precision numbers instead of TSV.
    #[arg(long, global = true)]
    pub json: bool,

    /// Decimal places for numbers in TSV output.
    #[arg(long, global = true, default_value_t = 4)]
    pub precision: usize,

    /// Print a `#`-prefixed column header above TSV rows.
    #[arg(long, global = true)]
    pub header: bool,

    /// More diagnostics on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score every system with one or more metrics.
    Eval(EvalArgs),
    /// Kendall's tau between each metric's ranking and its alpha = 0 base, over an alpha grid.
    Compare(CompareArgs),
    /// Count system pairs separated by Tukey's HSD.
    Discpower(DiscpowerArgs),
    /// Topic-sampling stability of pairwise system orderings.
    Stability(StabilityArgs),
    /// Agreement of N-system rankings with the full-campaign ranking.
    Subset(SubsetArgs),
    /// Write a synthetic campaign as run and qrels files.
    Synth(SynthArgs),
    /// Rank of a hypothetical S_rare or S_common system as it retrieves more relevant documents.
    Trajectory(TrajectoryArgs),
    /// Per-document retrieval counts and rarity for judged relevant documents.
    Report(ReportArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum DedupArg {
    Reject,
    First,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum OrderArg {
    /// Descending score, ties by descending doc-id.
    Score,
    /// The rank column, then score.
    Rank,
}

#[derive(Args, Debug)]
pub struct CampaignArgs {
    /// Run files or directories of run files; `-` reads one run from stdin.
    #[arg(long, required = true, num_args = 1..)]
    pub runs: Vec<String>,

    /// Qrels file, or `-` for stdin.
    #[arg(long)]
    pub qrels: String,

    /// Minimum grade counted as relevant.
    #[arg(long, default_value_t = 1)]
    pub relevance_threshold: u32,

    /// What to do with a document listed twice for one topic.
    #[arg(long, value_enum, default_value_t = DedupArg::Reject)]
    pub dedup: DedupArg,

    /// Evaluation order of each ranking.
    #[arg(long, value_enum, default_value_t = OrderArg::Score)]
    pub order: OrderArg,

    /// Rank depth up to which retrievals count towards S_d (`unlimited` or N).
    #[arg(long, default_value = "unlimited")]
    pub rarity_depth: CountDepth,

    /// Also drop topics without relevant documents from precision metrics.
    #[arg(long)]
    pub exclude_empty_topics: bool,
}

#[derive(Args, Debug)]
pub struct MetricArgs {
    /// Metric name, repeatable: P@k, AP, P@k_rareness, AP_rareness, P@k_mixture,
    /// optionally with parameters, e.g. `P@100_rareness(alpha=0.5,rarity=revised)`.
    #[arg(short, long = "metric")]
    pub metrics: Vec<String>,

    /// Cutoff used when a name gives none (`P@k`, AP).
    #[arg(long, default_value_t = 100)]
    pub cutoff: usize,

    /// Alpha used when a rarity metric name gives none.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,

    /// Rarity form used when a name gives none.
    #[arg(long, default_value = "eq2")]
    pub rarity: RarityVariant,

    /// AP evaluation depth: the cutoff or the full ranking.
    #[arg(long, value_enum, default_value_t = ApDepthArg::Cutoff)]
    pub ap_depth: ApDepthArg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum ApDepthArg {
    Cutoff,
    Full,
}

impl From<ApDepthArg> for ApDepth {
    fn from(a: ApDepthArg) -> Self {
        match a {
            ApDepthArg::Cutoff => ApDepth::Cutoff,
            ApDepthArg::Full => ApDepth::Full,
        }
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Also print per-topic scores.
    #[arg(short = 'q', long)]
    pub per_topic: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Comma-separated alpha grid.
    #[arg(long, default_value = DEFAULT_ALPHAS, value_delimiter = ',')]
    pub alphas: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct DiscpowerArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Comma-separated confidence levels.
    #[arg(long, default_value = "0.95,0.99", value_delimiter = ',')]
    pub levels: Vec<f64>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum DirectionArg {
    WinningSide,
    Fullset,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Topics sampled per trial (default: half of the evaluated topics).
    #[arg(long = "sample-topics")]
    pub sample_topics: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Score a pair by its winning side, or by agreement with the full-topic-set ordering.
    #[arg(long, value_enum, default_value_t = DirectionArg::WinningSide)]
    pub stability_direction: DirectionArg,
}

#[derive(Args, Debug)]
pub struct SubsetArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Comma-separated subset sizes N.
    #[arg(long, default_value = "2,4,8,16,32,64", value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub systems: usize,
    #[arg(long, default_value_t = 25)]
    pub topics: usize,
    /// Relevant documents per topic.
    #[arg(long, default_value_t = 50)]
    pub relevant: usize,
    /// Documents per topic pool.
    #[arg(long, default_value_t = 2000)]
    pub pool: usize,
    /// Probability that a rank position takes the next shared relevant document.
    #[arg(long, default_value_t = 0.3)]
    pub overlap_bias: f64,
    /// Documents per ranking.
    #[arg(long, default_value_t = 100)]
    pub depth: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory; receives qrels.txt and runs/<system>.run.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum KindArg {
    Rare,
    Common,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum PadArg {
    None,
    PoolNonrel,
}

#[derive(Args, Debug)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[arg(long, value_enum, default_value_t = KindArg::Rare)]
    pub kind: KindArg,
    /// Topic to trace, repeatable; several topics are averaged (default: first judged topic).
    #[arg(long = "topic")]
    pub topics: Vec<String>,
    /// Trace over every judged topic.
    #[arg(long, conflicts_with = "topics")]
    pub all_topics: bool,
    #[arg(long, default_value = DEFAULT_ALPHAS, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    /// Largest number of relevant documents D.
    #[arg(long, default_value_t = 50)]
    pub d_max: usize,
    #[arg(long, value_enum, default_value_t = PadArg::PoolNonrel)]
    pub pad: PadArg,
    /// Keep the other systems' relevant counts N_R at their original values.
    #[arg(long)]
    pub freeze_nr: bool,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Topic to report, repeatable (default: every judged topic).
    #[arg(long = "topic")]
    pub topics: Vec<String>,
    #[arg(long, default_value = "eq2")]
    pub rarity: RarityVariant,
}
