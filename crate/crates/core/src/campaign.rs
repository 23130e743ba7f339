//! Batch evaluation of every system on every judged topic, aggregation to
//! per-system means and midrank system rankings.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::Metric;
use crate::rarity::{CountDepth, RarityIndex};
use crate::trec_io::{Campaign, Qrels, Run};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EvalOptions {
    /// Depth at which retrievals count towards S_d.
    pub count_depth: CountDepth,
    /// Also drop topics without relevant documents from the precision
    /// family. The AP family always drops them.
    pub exclude_empty_topics: bool,
}

/// System × topic scores for one metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreMatrix {
    pub metric: Metric,
    pub systems: Vec<String>,
    pub topics: Vec<String>,
    /// Row-major, one row per system.
    values: Vec<f64>,
    /// Per topic; skipped topics hold 0 and are left out of every aggregate.
    skipped: Vec<bool>,
}

impl ScoreMatrix {
    pub fn new(
        metric: Metric,
        systems: Vec<String>,
        topics: Vec<String>,
        values: Vec<f64>,
        skipped: Vec<bool>,
    ) -> Result<ScoreMatrix> {
        if values.len() != systems.len() * topics.len() || skipped.len() != topics.len() {
            return Err(Error::Format("score matrix dimensions do not match".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Format(format!("score {v} is not a finite non-negative number")));
        }
        Ok(ScoreMatrix {
            metric,
            systems,
            topics,
            values,
            skipped,
        })
    }

    pub fn num_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn get(&self, system: usize, topic: usize) -> f64 {
        self.values[system * self.topics.len() + topic]
    }

    pub fn row(&self, system: usize) -> &[f64] {
        let n = self.topics.len();
        &self.values[system * n..(system + 1) * n]
    }

    pub fn is_skipped(&self, topic: usize) -> bool {
        self.skipped[topic]
    }

    pub fn skipped_topics(&self) -> impl Iterator<Item = &str> {
        self.topics
            .iter()
            .zip(&self.skipped)
            .filter(|(_, &s)| s)
            .map(|(t, _)| t.as_str())
    }

    /// Indices of topics that take part in aggregation.
    pub fn active_topics(&self) -> Vec<usize> {
        (0..self.topics.len()).filter(|&t| !self.skipped[t]).collect()
    }

    pub fn system_index(&self, system: &str) -> Option<usize> {
        self.systems.iter().position(|s| s == system)
    }

    /// Per-system means over the given topic indices, summed in the order given.
    pub fn means_over(&self, topics: &[usize]) -> Vec<f64> {
        (0..self.systems.len())
            .map(|s| {
                let row = self.row(s);
                let mut sum = 0.0;
                for &t in topics {
                    sum += row[t];
                }
                sum / topics.len() as f64
            })
            .collect()
    }
}

/// Evaluates every metric over the campaign's judged topics. The rarity
/// index is built once and shared by all metrics.
pub fn evaluate_campaign(
    campaign: &Campaign,
    metrics: &[Metric],
    options: &EvalOptions,
    exec: Execution,
) -> Result<Vec<ScoreMatrix>> {
    let index = RarityIndex::build(campaign, options.count_depth);
    let runs: Vec<&Run> = campaign.runs().iter().collect();
    evaluate_with_index(&runs, campaign.qrels(), &index, metrics, options, exec)
}

/// Evaluates `runs` against `qrels` with a prebuilt rarity index.
pub fn evaluate_with_index(
    runs: &[&Run],
    qrels: &Qrels,
    index: &RarityIndex,
    metrics: &[Metric],
    options: &EvalOptions,
    exec: Execution,
) -> Result<Vec<ScoreMatrix>> {
    let topics: Vec<String> = qrels.topics().map(str::to_string).collect();
    if topics.is_empty() {
        return Err(Error::NoJudgedTopics);
    }
    for m in metrics {
        m.validate()?;
        m.warn_if_unusual();
    }
    let judgments: Vec<_> = topics.iter().map(|t| qrels.topic(t)).collect();
    let rarity: Vec<_> = topics.iter().map(|t| index.topic(t)).collect();
    let empty: Vec<bool> = judgments.iter().map(|j| j.num_relevant() == 0).collect();

    // One row per (metric, system); each row is independent.
    let n_sys = runs.len();
    let rows = exec.map(metrics.len() * n_sys, |cell| {
        let metric = &metrics[cell / n_sys];
        let run = runs[cell % n_sys];
        topics
            .iter()
            .enumerate()
            .map(|(t, topic)| {
                metric
                    .evaluate(run.ranking(topic), &judgments[t], &rarity[t])
                    .unwrap_or(0.0)
            })
            .collect::<Vec<f64>>()
    });

    let systems: Vec<String> = runs.iter().map(|r| r.system_id().to_string()).collect();
    metrics
        .iter()
        .enumerate()
        .map(|(m, metric)| {
            let values = rows[m * n_sys..(m + 1) * n_sys].concat();
            let skip_empty = metric.kind.is_ap_family() || options.exclude_empty_topics;
            let skipped = empty.iter().map(|&e| e && skip_empty).collect();
            ScoreMatrix::new(*metric, systems.clone(), topics.clone(), values, skipped)
        })
        .collect()
}

/// Arithmetic mean over the non-skipped topics for each system.
pub fn mean_scores(matrix: &ScoreMatrix) -> Result<BTreeMap<String, f64>> {
    let active = matrix.active_topics();
    if active.is_empty() {
        return Err(Error::Undefined(format!(
            "{}: every topic is skipped, no mean is defined",
            matrix.metric
        )));
    }
    Ok(matrix
        .systems
        .iter()
        .cloned()
        .zip(matrix.means_over(&active))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEntry {
    pub system: String,
    pub mean: f64,
    /// 1 is best; tied means share the average of the positions they occupy.
    pub rank: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemRanking {
    /// Best first; ties listed by system id.
    pub entries: Vec<RankEntry>,
}

impl SystemRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rank_of(&self, system: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.system == system)
            .map(|e| e.rank)
    }

    pub fn systems(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.system.as_str())
    }

    /// Keeps only the listed systems, re-ranking them among themselves.
    pub fn restricted_to(&self, systems: &[&str]) -> SystemRanking {
        let means: BTreeMap<String, f64> = self
            .entries
            .iter()
            .filter(|e| systems.contains(&e.system.as_str()))
            .map(|e| (e.system.clone(), e.mean))
            .collect();
        rank_systems(&means)
    }
}

/// Midranks of `scores` with the highest score ranked 1. Only exactly equal
/// scores tie.
pub fn midranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = rank;
        }
        i = j;
    }
    ranks
}

pub fn rank_systems(means: &BTreeMap<String, f64>) -> SystemRanking {
    let systems: Vec<&String> = means.keys().collect();
    let scores: Vec<f64> = means.values().copied().collect();
    let ranks = midranks(&scores);
    let mut entries: Vec<RankEntry> = systems
        .into_iter()
        .zip(scores)
        .zip(ranks)
        .map(|((s, mean), rank)| RankEntry {
            system: s.clone(),
            mean,
            rank,
        })
        .collect();
    entries.sort_by(|a, b| {
        a.rank
            .total_cmp(&b.rank)
            .then_with(|| a.system.cmp(&b.system))
    });
    SystemRanking { entries }
}

/// Convenience: mean scores of `matrix` ranked.
pub fn ranking_of(matrix: &ScoreMatrix) -> Result<SystemRanking> {
    Ok(rank_systems(&mean_scores(matrix)?))
}
