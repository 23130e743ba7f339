//! Interned form of a campaign for procedures that re-evaluate many system
//! subsets. Documents become per-topic integer ids and rarity counts become
//! dense arrays; the scoring itself goes through the same kernels as the
//! string-keyed path, so both give bit-identical numbers.

use std::collections::HashMap;

use crate::campaign::EvalOptions;
use crate::error::{Error, Result};
use crate::metrics::{kernels, Metric, MetricKind};
use crate::rarity::rarity_value;
use crate::trec_io::Campaign;

struct Topic {
    /// Indexed by interned doc id.
    relevant: Vec<bool>,
    num_relevant: usize,
    /// One ranking per system, in canonical order.
    rankings: Vec<Vec<u32>>,
}

pub(crate) struct CompactCampaign {
    num_systems: usize,
    topics: Vec<Topic>,
}

impl CompactCampaign {
    pub fn new(campaign: &Campaign) -> CompactCampaign {
        let qrels = campaign.qrels();
        let topics = qrels
            .topics()
            .map(|topic| {
                let judged = qrels.topic(topic);
                let mut ids: HashMap<&str, u32> = HashMap::new();
                let mut relevant = Vec::new();
                let rankings = campaign
                    .runs()
                    .iter()
                    .map(|run| {
                        run.ranking(topic)
                            .iter()
                            .map(|d| {
                                *ids.entry(d.doc_id.as_str()).or_insert_with(|| {
                                    relevant.push(judged.is_relevant(&d.doc_id));
                                    (relevant.len() - 1) as u32
                                })
                            })
                            .collect()
                    })
                    .collect();
                Topic {
                    relevant,
                    num_relevant: judged.num_relevant(),
                    rankings,
                }
            })
            .collect();
        CompactCampaign {
            num_systems: campaign.num_systems(),
            topics,
        }
    }

    pub fn num_systems(&self) -> usize {
        self.num_systems
    }

    /// Mean score of each listed system when only `systems` take part in the
    /// campaign, in the order given.
    pub fn subset_means(
        &self,
        systems: &[usize],
        metric: &Metric,
        options: &EvalOptions,
    ) -> Result<Vec<f64>> {
        let skip_empty = metric.kind.is_ap_family() || options.exclude_empty_topics;
        let active: Vec<&Topic> = self
            .topics
            .iter()
            .filter(|t| !(skip_empty && t.num_relevant == 0))
            .collect();
        if active.is_empty() {
            return Err(Error::Undefined(format!(
                "{metric}: every topic is skipped, no mean is defined"
            )));
        }
        let total = systems.len();
        let c = &metric.config;
        let mut sums = vec![0.0; total];
        let mut counts: Vec<u32> = Vec::new();
        for topic in &active {
            if metric.kind.uses_rarity() {
                counts.clear();
                counts.resize(topic.relevant.len(), 0);
                for &s in systems {
                    let r = &topic.rankings[s];
                    for &d in &r[..options.count_depth.take(r.len())] {
                        counts[d as usize] += 1;
                    }
                }
            }
            for (slot, &s) in systems.iter().enumerate() {
                let ranking = &topic.rankings[s];
                let rels = ranking.iter().map(|&d| topic.relevant[d as usize]);
                let gains = ranking.iter().map(|&d| {
                    topic.relevant[d as usize]
                        .then(|| rarity_value(total, counts[d as usize].max(1), c.rarity))
                });
                let depth = metric.depth(ranking.len());
                let score = match metric.kind {
                    MetricKind::Precision => Some(kernels::precision(rels, c.cutoff)),
                    MetricKind::PrecisionRareness => {
                        Some(kernels::rareness_precision(gains, c.cutoff, c.alpha))
                    }
                    MetricKind::PrecisionMixture => Some(kernels::mixture(gains, c.cutoff, c.alpha)),
                    MetricKind::AveragePrecision => {
                        kernels::average_precision(rels, depth, topic.num_relevant)
                    }
                    MetricKind::AveragePrecisionRareness => {
                        kernels::ap_rareness(gains, depth, c.alpha, topic.num_relevant)
                    }
                };
                sums[slot] += score.unwrap_or(0.0);
            }
        }
        let n = active.len() as f64;
        Ok(sums.into_iter().map(|s| s / n).collect())
    }
}
