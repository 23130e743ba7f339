//! Rareness-weighted retrieval evaluation.
//!
//! Standard precision and average precision reward a system for every
//! relevant document it ranks. The metrics in this crate additionally reward
//! relevant documents that few other systems in the same campaign retrieved,
//! with a weight `alpha` that reverts to the standard metric at zero.
//!
//! The crate is organised around the evaluation pipeline:
//!
//! * [`trec_io`] parses TREC run and qrels files into a [`Campaign`].
//! * [`rarity`] counts, per topic, how many systems retrieved each document.
//! * [`metrics`] scores one ranking on one topic.
//! * [`campaign`] scores every system on every topic and ranks systems.
//! * [`stats`] holds the meta-evaluation procedures: Kendall's tau,
//!   discriminative power under Tukey's HSD, topic-sampling stability and
//!   the subset-of-systems experiment.
//! * [`synth`] generates synthetic campaigns and hypothetical systems.
//!
//! Trial loops and cell evaluation run on rayon when the `parallel` feature
//! is enabled (the default); see [`Execution`].

pub mod campaign;
mod compact;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod rarity;
pub mod stats;
pub mod synth;
pub mod trec_io;

/// Seed used by every randomised procedure unless one is given.
pub const DEFAULT_SEED: u64 = 20_110_724;

pub use campaign::{
    evaluate_campaign, mean_scores, rank_systems, EvalOptions, RankEntry, ScoreMatrix,
    SystemRanking,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use metrics::{ApDepth, Metric, MetricConfig, MetricDefaults, MetricKind};
pub use rarity::{rarity_report, CountDepth, RarityIndex, RarityRow, RarityVariant};
pub use trec_io::{
    load_campaign, parse_qrels, parse_run, Campaign, DedupPolicy, LoadOptions, ParseOptions,
    Qrels, RankOrder, RankedDoc, Run, Source,
};
