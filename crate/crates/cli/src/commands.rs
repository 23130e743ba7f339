use std::fs;

use anyhow::{Context, Result};
use rareval::campaign::ranking_of;
use rareval::stats::{
    discriminative_power, kendall_tau, stability_of_matrix, subset_experiment, StabilityConfig,
    StabilityDirection, SubsetConfig,
};
use rareval::synth::{
    generate_campaign, rank_trajectory, HypotheticalKind, Pad, SynthSpec, TrajectoryOptions,
};
use rareval::{
    evaluate_campaign, load_campaign, rarity_report, Campaign, DedupPolicy, EvalOptions, Execution,
    LoadOptions, Metric, MetricDefaults, ParseOptions, RankOrder, RarityIndex, Source,
};

use crate::args::*;
use crate::output::{Cell, Table};
use crate::UsageError;

fn load(args: &CampaignArgs, exec: Execution) -> Result<Campaign> {
    let options = LoadOptions {
        parse: ParseOptions {
            dedup: match args.dedup {
                DedupArg::Reject => DedupPolicy::Reject,
                DedupArg::First => DedupPolicy::First,
            },
            order: match args.order {
                OrderArg::Score => RankOrder::Score,
                OrderArg::Rank => RankOrder::RankField,
            },
        },
        relevance_threshold: args.relevance_threshold,
    };
    let runs: Vec<Source> = args.runs.iter().map(|r| Source::from_arg(r)).collect();
    Ok(load_campaign(&runs, &Source::from_arg(&args.qrels), &options, exec)?)
}

fn eval_options(args: &CampaignArgs) -> EvalOptions {
    EvalOptions {
        count_depth: args.rarity_depth,
        exclude_empty_topics: args.exclude_empty_topics,
    }
}

/// Parses the requested metrics, or `fallback` when none were given.
fn metrics(args: &MetricArgs, fallback: &[&str]) -> Result<Vec<Metric>> {
    let defaults = MetricDefaults {
        cutoff: args.cutoff,
        alpha: args.alpha,
        rarity: args.rarity,
        ap_depth: args.ap_depth.into(),
    };
    let names: Vec<&str> = if args.metrics.is_empty() {
        fallback.to_vec()
    } else {
        args.metrics.iter().map(String::as_str).collect()
    };
    Ok(names
        .iter()
        .map(|n| Metric::parse(n, &defaults))
        .collect::<rareval::Result<_>>()?)
}

fn single_metric(args: &MetricArgs, fallback: &str) -> Result<Metric> {
    if args.metrics.len() > 1 {
        return Err(UsageError("this command takes a single --metric".into()).into());
    }
    Ok(metrics(args, &[fallback])?.remove(0))
}

pub fn eval(args: &EvalArgs, exec: Execution) -> Result<Vec<Table>> {
    let metrics = metrics(&args.metric, &["P@k", "P@k_rareness"])?;
    let campaign = load(&args.campaign, exec)?;
    let matrices = evaluate_campaign(&campaign, &metrics, &eval_options(&args.campaign), exec)?;
    let mut table = Table::new(&["metric", "system", "topic", "score"]);
    for m in &matrices {
        let name = m.metric.to_string();
        let active = m.active_topics();
        if active.is_empty() {
            log::warn!("{name}: every topic is skipped; no scores reported");
            continue;
        }
        let means = m.means_over(&active);
        for (s, system) in m.systems.iter().enumerate() {
            if args.per_topic {
                for &t in &active {
                    table.push(vec![
                        name.as_str().into(),
                        system.as_str().into(),
                        m.topics[t].as_str().into(),
                        m.get(s, t).into(),
                    ]);
                }
            }
            table.push(vec![name.as_str().into(), system.as_str().into(), "ALL".into(), means[s].into()]);
        }
    }
    Ok(vec![table])
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(UsageError("the alpha grid is empty".into()).into());
    }
    Ok(())
}

pub fn compare(args: &CompareArgs, exec: Execution) -> Result<Vec<Table>> {
    check_alphas(&args.alphas)?;
    let bases = metrics(&args.metric, &["P@k_rareness", "AP_rareness"])?;
    let mut all = Vec::new();
    for b in &bases {
        all.push(b.base());
        for &a in &args.alphas {
            let m = b.with_alpha(a);
            m.validate()?;
            all.push(m);
        }
    }
    let campaign = load(&args.campaign, exec)?;
    let matrices = evaluate_campaign(&campaign, &all, &eval_options(&args.campaign), exec)?;

    let mut table = Table::new(&["alpha", "metric", "tau"]);
    let per_base = args.alphas.len() + 1;
    for chunk in matrices.chunks(per_base) {
        let base_ranking = ranking_of(&chunk[0])?;
        for (m, &alpha) in chunk[1..].iter().zip(&args.alphas) {
            let tau = match kendall_tau(&ranking_of(m)?, &base_ranking) {
                Ok(t) => Cell::Num(t),
                Err(e @ rareval::Error::Undefined(_)) => {
                    log::warn!("{}: tau undefined: {e}", m.metric);
                    Cell::Missing
                }
                Err(e) => return Err(e.into()),
            };
            table.push(vec![alpha.into(), m.metric.to_string().into(), tau]);
        }
    }
    Ok(vec![table])
}

pub fn discpower(args: &DiscpowerArgs, exec: Execution) -> Result<Vec<Table>> {
    for &l in &args.levels {
        if !(l > 0.0 && l < 1.0) {
            return Err(UsageError(format!("confidence level must be in (0, 1), got {l}")).into());
        }
    }
    let metrics = metrics(&args.metric, &["P@k", "P@k_rareness", "AP", "AP_rareness"])?;
    let campaign = load(&args.campaign, exec)?;
    let matrices = evaluate_campaign(&campaign, &metrics, &eval_options(&args.campaign), exec)?;
    let mut table = Table::new(&["metric", "level", "pairs", "total_pairs"]);
    for m in &matrices {
        for &level in &args.levels {
            let dp = discriminative_power(m, level)?;
            table.push(vec![
                m.metric.to_string().into(),
                level.into(),
                dp.significant_pairs.into(),
                dp.total_pairs.into(),
            ]);
        }
    }
    Ok(vec![table])
}

pub fn stability(args: &StabilityArgs, exec: Execution) -> Result<Vec<Table>> {
    let metrics = metrics(&args.metric, &["P@k", "P@k_rareness"])?;
    let campaign = load(&args.campaign, exec)?;
    let matrices = evaluate_campaign(&campaign, &metrics, &eval_options(&args.campaign), exec)?;
    let mut overall = Table::tagged("overall", &["metric", "value"]);
    let mut pairs = Table::tagged("pair", &["metric", "system_a", "system_b", "value"]);
    for m in &matrices {
        let topics = m.active_topics().len();
        let sample_size = args.sample_topics.unwrap_or((topics / 2).max(1));
        let config = StabilityConfig {
            sample_size,
            trials: args.trials,
            seed: args.seed,
            direction: match args.stability_direction {
                DirectionArg::WinningSide => StabilityDirection::WinningSide,
                DirectionArg::Fullset => StabilityDirection::FullSet,
            },
        };
        log::info!("{}: sampling {sample_size} of {topics} topics per trial", m.metric);
        let r = stability_of_matrix(m, &config, exec)?;
        let name = m.metric.to_string();
        overall.push(vec![name.as_str().into(), r.overall.into()]);
        for p in &r.pairs {
            pairs.push(vec![name.as_str().into(), p.a.as_str().into(), p.b.as_str().into(), p.value.into()]);
        }
    }
    Ok(vec![overall, pairs])
}

pub fn subset(args: &SubsetArgs, exec: Execution) -> Result<Vec<Table>> {
    let metric = single_metric(&args.metric, "P@k_rareness")?;
    let campaign = load(&args.campaign, exec)?;
    let mut table = Table::new(&["N", "mean_tau", "trials"]);
    for &n in &args.sizes {
        let config = SubsetConfig { subset_size: n, trials: args.trials, seed: args.seed };
        let r = subset_experiment(&campaign, &metric, &eval_options(&args.campaign), &config, exec)?;
        if r.resamples > 0 {
            eprintln!("N={n}: {} draws with undefined tau were redrawn", r.resamples);
        }
        table.push(vec![n.into(), r.mean_tau.into(), r.trials.into()]);
    }
    Ok(vec![table])
}

pub fn synth(args: &SynthArgs) -> Result<Vec<Table>> {
    let spec = SynthSpec {
        n_systems: args.systems,
        n_topics: args.topics,
        n_relevant_per_topic: args.relevant,
        doc_pool_size: args.pool,
        overlap_bias: args.overlap_bias,
        run_depth: args.depth,
        seed: args.seed,
    };
    let campaign = generate_campaign(&spec)?;
    let run_dir = args.out.join("runs");
    fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
    let mut table = Table::new(&["kind", "path"]);
    let qrels_path = args.out.join("qrels.txt");
    fs::write(&qrels_path, campaign.qrels().to_trec_string())
        .with_context(|| format!("writing {}", qrels_path.display()))?;
    table.push(vec!["qrels".into(), qrels_path.display().to_string().into()]);
    for run in campaign.runs() {
        let path = run_dir.join(format!("{}.run", run.system_id()));
        fs::write(&path, run.to_trec_string()).with_context(|| format!("writing {}", path.display()))?;
        table.push(vec!["run".into(), path.display().to_string().into()]);
    }
    Ok(vec![table])
}

pub fn trajectory(args: &TrajectoryArgs, exec: Execution) -> Result<Vec<Table>> {
    check_alphas(&args.alphas)?;
    let metric = single_metric(&args.metric, "P@k_rareness")?;
    let campaign = load(&args.campaign, exec)?;
    let topics = if args.all_topics {
        campaign.judged_topics()
    } else if args.topics.is_empty() {
        campaign.judged_topics().into_iter().take(1).collect()
    } else {
        args.topics.clone()
    };
    let options = TrajectoryOptions {
        kind: match args.kind {
            KindArg::Rare => HypotheticalKind::Rare,
            KindArg::Common => HypotheticalKind::Common,
        },
        topics,
        alphas: args.alphas.clone(),
        d_max: args.d_max,
        metric,
        eval: eval_options(&args.campaign),
        pad: match args.pad {
            PadArg::None => Pad::None,
            PadArg::PoolNonrel => Pad::PoolNonrel,
        },
        freeze_relevant_counts: args.freeze_nr,
    };
    let results = rank_trajectory(&campaign, &options, exec)?;
    let mut table = Table::new(&["alpha", "D", "rank"]);
    for r in &results {
        match r.d_star {
            Some(d) => eprintln!("alpha={}: D*={d}", r.alpha),
            None => eprintln!("alpha={}: D*=none (rank 1 not reached by D={})", r.alpha, args.d_max),
        }
        for &(d, rank) in &r.ranks {
            table.push(vec![r.alpha.into(), d.into(), rank.into()]);
        }
    }
    Ok(vec![table])
}

pub fn report(args: &ReportArgs, exec: Execution) -> Result<Vec<Table>> {
    let campaign = load(&args.campaign, exec)?;
    let index = RarityIndex::build(&campaign, args.campaign.rarity_depth);
    let topics = if args.topics.is_empty() {
        campaign.judged_topics()
    } else {
        args.topics.clone()
    };
    let mut table = Table::new(&["topic", "doc", "grade", "S_d", "rarity"]);
    for topic in &topics {
        for row in rarity_report(&campaign, &index, topic, args.rarity)? {
            table.push(vec![
                row.topic.into(),
                row.doc.into(),
                row.grade.into(),
                row.count.into(),
                row.rarity.into(),
            ]);
        }
    }
    Ok(vec![table])
}
