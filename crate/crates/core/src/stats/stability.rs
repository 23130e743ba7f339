//! Topic-sampling stability of pairwise system orderings.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::Serialize;

use super::rng::trial_rng;
use crate::campaign::{evaluate_campaign, EvalOptions, ScoreMatrix};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::Metric;
use crate::trec_io::Campaign;

/// Trials per parallel work item.
const BLOCK: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityDirection {
    /// Fraction of trials won by whichever system of the pair wins more often.
    #[default]
    WinningSide,
    /// Fraction of trials agreeing with the ordering on the full topic set.
    /// Pairs tied on the full set fall back to the winning side.
    #[serde(rename = "fullset")]
    FullSet,
}

impl FromStr for StabilityDirection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "winning-side" | "winning" => Ok(StabilityDirection::WinningSide),
            "fullset" | "full-set" => Ok(StabilityDirection::FullSet),
            _ => Err(Error::Config(format!(
                "unknown stability direction `{s}` (expected winning-side or fullset)"
            ))),
        }
    }
}

impl fmt::Display for StabilityDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityDirection::WinningSide => "winning-side",
            StabilityDirection::FullSet => "fullset",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StabilityConfig {
    /// T, topics sampled per trial.
    pub sample_size: usize,
    pub trials: usize,
    pub seed: u64,
    pub direction: StabilityDirection,
}

impl StabilityConfig {
    pub fn new(sample_size: usize, trials: usize, seed: u64) -> StabilityConfig {
        StabilityConfig {
            sample_size,
            trials,
            seed,
            direction: StabilityDirection::WinningSide,
        }
    }
}

/// Trial outcomes for one ordered pair `(a, b)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PairTally {
    pub wins_a: u64,
    pub wins_b: u64,
    pub ties: u64,
}

impl PairTally {
    pub fn trials(&self) -> u64 {
        self.wins_a + self.wins_b + self.ties
    }

    /// Winning side's share, each tie counting half to both sides.
    pub fn value(&self) -> f64 {
        let a = 2 * self.wins_a + self.ties;
        let b = 2 * self.wins_b + self.ties;
        a.max(b) as f64 / (2 * self.trials()) as f64
    }

    /// Share of trials agreeing with `full_order` (`Greater` when `a` is ahead).
    pub fn agreement(&self, full_order: std::cmp::Ordering) -> f64 {
        let agree = match full_order {
            std::cmp::Ordering::Greater => self.wins_a,
            std::cmp::Ordering::Less => self.wins_b,
            std::cmp::Ordering::Equal => return self.value(),
        };
        (2 * agree + self.ties) as f64 / (2 * self.trials()) as f64
    }

    fn add(&mut self, other: &PairTally) {
        self.wins_a += other.wins_a;
        self.wins_b += other.wins_b;
        self.ties += other.ties;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairStability {
    pub a: String,
    pub b: String,
    pub tally: PairTally,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityResult {
    pub metric: Metric,
    pub config: StabilityConfig,
    /// Unordered pairs in system order.
    pub pairs: Vec<PairStability>,
    /// Mean over pairs.
    pub overall: f64,
}

/// Evaluates `metric` on the campaign and measures its stability.
pub fn stability(
    campaign: &Campaign,
    metric: &Metric,
    options: &EvalOptions,
    config: &StabilityConfig,
    exec: Execution,
) -> Result<StabilityResult> {
    let matrix = evaluate_campaign(campaign, &[*metric], options, exec)?.remove(0);
    stability_of_matrix(&matrix, config, exec)
}

/// Samples `config.sample_size` of the matrix's active topics per trial and
/// tallies, for every system pair, which one has the higher mean.
pub fn stability_of_matrix(
    matrix: &ScoreMatrix,
    config: &StabilityConfig,
    exec: Execution,
) -> Result<StabilityResult> {
    let topics = matrix.active_topics();
    let n_sys = matrix.num_systems();
    if config.trials == 0 {
        return Err(Error::Config("stability needs at least one trial".into()));
    }
    if config.sample_size == 0 || config.sample_size > topics.len() {
        return Err(Error::Config(format!(
            "topic sample size {} must be between 1 and the {} evaluated topics",
            config.sample_size,
            topics.len()
        )));
    }
    if n_sys < 2 {
        return Err(Error::Config("stability needs at least two systems".into()));
    }
    let n_pairs = n_sys * (n_sys - 1) / 2;

    let blocks = config.trials.div_ceil(BLOCK);
    let partial = exec.map(blocks, |block| {
        let mut tallies = vec![PairTally::default(); n_pairs];
        let mut chosen = Vec::with_capacity(config.sample_size);
        for trial in block * BLOCK..((block + 1) * BLOCK).min(config.trials) {
            let mut rng = trial_rng(config.seed, trial as u64);
            chosen.clear();
            chosen.extend(
                sample(&mut rng, topics.len(), config.sample_size)
                    .into_iter()
                    .map(|i| topics[i]),
            );
            let means = matrix.means_over(&chosen);
            let mut p = 0;
            for a in 0..n_sys {
                for b in a + 1..n_sys {
                    let t = &mut tallies[p];
                    if means[a] > means[b] {
                        t.wins_a += 1;
                    } else if means[b] > means[a] {
                        t.wins_b += 1;
                    } else {
                        t.ties += 1;
                    }
                    p += 1;
                }
            }
        }
        tallies
    });
    let mut tallies = vec![PairTally::default(); n_pairs];
    for block in &partial {
        for (total, t) in tallies.iter_mut().zip(block) {
            total.add(t);
        }
    }

    let full_means = matrix.means_over(&topics);
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut p = 0;
    for a in 0..n_sys {
        for b in a + 1..n_sys {
            let tally = tallies[p];
            let value = match config.direction {
                StabilityDirection::WinningSide => tally.value(),
                StabilityDirection::FullSet => {
                    tally.agreement(full_means[a].total_cmp(&full_means[b]))
                }
            };
            pairs.push(PairStability {
                a: matrix.systems[a].clone(),
                b: matrix.systems[b].clone(),
                tally,
                value,
            });
            p += 1;
        }
    }
    let overall = pairs.iter().map(|p| p.value).sum::<f64>() / pairs.len() as f64;
    Ok(StabilityResult {
        metric: matrix.metric,
        config: *config,
        pairs,
        overall,
    })
}
