//! How well a system ranking computed from only N participants agrees with
//! the ranking from the whole campaign.

use rand::seq::index::sample;
use serde::Serialize;

use super::kendall::tau_b;
use super::rng::trial_rng;
use crate::campaign::{midranks, EvalOptions};
use crate::compact::CompactCampaign;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::Metric;
use crate::trec_io::Campaign;

/// Redraws allowed in one trial before giving up on an all-tied campaign.
const MAX_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SubsetConfig {
    /// N, systems sampled per trial.
    pub subset_size: usize,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetResult {
    pub subset_size: usize,
    pub trials: usize,
    pub mean_tau: f64,
    /// Draws discarded because tau was undefined on them.
    pub resamples: usize,
}

/// Mean score of each listed system (by position in `campaign.runs()`) when
/// rarity is counted over those systems only.
pub fn evaluate_subset(
    campaign: &Campaign,
    metric: &Metric,
    options: &EvalOptions,
    systems: &[usize],
) -> Result<Vec<f64>> {
    metric.validate()?;
    if let Some(&s) = systems.iter().find(|&&s| s >= campaign.num_systems()) {
        return Err(Error::Config(format!("system index {s} out of range")));
    }
    if systems.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    CompactCampaign::new(campaign).subset_means(systems, metric, options)
}

/// Per trial: draw N systems, recount rarity over them alone, rank them, and
/// take tau-b against the full-campaign ranking restricted to the same
/// systems. Returns the mean over trials.
pub fn subset_experiment(
    campaign: &Campaign,
    metric: &Metric,
    options: &EvalOptions,
    config: &SubsetConfig,
    exec: Execution,
) -> Result<SubsetResult> {
    metric.validate()?;
    let n_sys = campaign.num_systems();
    let n = config.subset_size;
    if n < 2 || n > n_sys {
        return Err(Error::Config(format!(
            "subset size must be between 2 and the {n_sys} systems, got {n}"
        )));
    }
    if config.trials == 0 {
        return Err(Error::Config("subset experiment needs at least one trial".into()));
    }
    let compact = CompactCampaign::new(campaign);
    let all: Vec<usize> = (0..compact.num_systems()).collect();
    let full_ranks = midranks(&compact.subset_means(&all, metric, options)?);

    let outcomes = exec.try_map(config.trials, |trial| {
        let mut rng = trial_rng(config.seed, trial as u64);
        let mut resamples = 0;
        loop {
            let mut chosen = sample(&mut rng, n_sys, n).into_vec();
            chosen.sort_unstable();
            let sub_ranks = midranks(&compact.subset_means(&chosen, metric, options)?);
            let restricted: Vec<f64> = chosen.iter().map(|&s| full_ranks[s]).collect();
            match tau_b(&restricted, &sub_ranks) {
                Ok(tau) => return Ok((tau, resamples)),
                Err(Error::Undefined(_)) if resamples < MAX_RESAMPLES => resamples += 1,
                Err(Error::Undefined(_)) => {
                    return Err(Error::Undefined(format!(
                        "tau stayed undefined after {MAX_RESAMPLES} redraws in trial {trial}: \
                         the sampled systems are all tied"
                    )))
                }
                Err(e) => return Err(e),
            }
        }
    })?;

    let mut sum = 0.0;
    let mut resamples = 0;
    for (tau, r) in &outcomes {
        sum += tau;
        resamples += r;
    }
    if resamples > 0 {
        log::info!("subset N={n}: {resamples} draws with undefined tau were redrawn");
    }
    Ok(SubsetResult {
        subset_size: n,
        trials: config.trials,
        mean_tau: sum / config.trials as f64,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricDefaults;
    use crate::rarity::tests::toy4;
    use crate::trec_io::{parse_qrels_str, parse_run_str, ParseOptions};

    fn metric(name: &str) -> Metric {
        Metric::parse(name, &MetricDefaults::default()).unwrap()
    }

    #[test]
    fn full_subset_is_exactly_one() {
        let c = toy4();
        let cfg = SubsetConfig { subset_size: 4, trials: 20, seed: 5 };
        for name in ["P@3_rareness(alpha=1)", "AP_rareness(alpha=0.5,rarity=revised)"] {
            let r = subset_experiment(&c, &metric(name), &EvalOptions::default(), &cfg, Execution::Sequential)
                .unwrap();
            assert_eq!(r.mean_tau, 1.0, "{name}");
        }
    }

    #[test]
    fn duplicated_pair_agrees_every_trial() {
        let runs = [("A", "d1", "d2"), ("B", "d3", "d1")]
            .iter()
            .flat_map(|&(sys, x, y)| {
                [format!("{sys}1"), format!("{sys}2")].into_iter().map(move |id| {
                    parse_run_str(
                        &format!("t1 Q0 {x} 1 2 {id}\nt1 Q0 {y} 2 1 {id}\n"),
                        &ParseOptions::default(),
                    )
                    .unwrap()
                })
            })
            .collect();
        let qrels = parse_qrels_str("t1 0 d1 1\nt1 0 d2 1\nt1 0 d3 0\n", 1).unwrap();
        let c = Campaign::new(runs, qrels).unwrap();
        let cfg = SubsetConfig { subset_size: 2, trials: 200, seed: 11 };
        let r = subset_experiment(&c, &metric("P@2_rareness(alpha=1)"), &EvalOptions::default(), &cfg, Execution::Sequential)
            .unwrap();
        // Draws of two copies of the same system tie on both sides and are redrawn.
        assert_eq!(r.mean_tau, 1.0);
        assert!(r.resamples > 0);
    }

    #[test]
    fn execution_strategy_does_not_change_result() {
        let c = toy4();
        let cfg = SubsetConfig { subset_size: 3, trials: 64, seed: 99 };
        let m = metric("P@2_rareness(alpha=1)");
        let seq = subset_experiment(&c, &m, &EvalOptions::default(), &cfg, Execution::Sequential);
        let par = subset_experiment(&c, &m, &EvalOptions::default(), &cfg, Execution::Parallel);
        assert_eq!(seq.unwrap(), par.unwrap());
    }

    #[test]
    fn bad_sizes() {
        let c = toy4();
        let m = metric("P@2");
        for n in [0, 1, 5] {
            let cfg = SubsetConfig { subset_size: n, trials: 1, seed: 0 };
            assert!(subset_experiment(&c, &m, &EvalOptions::default(), &cfg, Execution::Sequential).is_err());
        }
        assert!(evaluate_subset(&c, &m, &EvalOptions::default(), &[7]).is_err());
    }
}
