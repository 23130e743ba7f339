//! Synthetic campaigns and hypothetical systems.
//!
//! [`generate_campaign`] produces a seeded campaign in which each system
//! mixes a shared "consensus" list of relevant documents with its own
//! weighted draws from the topic's document pool. `overlap_bias` is the
//! per-position probability of taking the next consensus document, so it
//! controls how concentrated the systems are on the same relevant documents.
//!
//! [`make_s_rare`] and [`make_s_common`] build the two hypothetical systems
//! used to probe the metrics: one that retrieves only relevant documents no
//! other system found, and one that retrieves the most commonly found
//! relevant documents first. [`rank_trajectory`] inserts such a system into
//! the campaign and tracks its rank as it retrieves more relevant documents.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::campaign::{evaluate_with_index, mean_scores, rank_systems, EvalOptions};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::Metric;
use crate::rarity::{CountDepth, RarityIndex};
use crate::stats::rng::trial_rng;
use crate::trec_io::{Campaign, Qrels, RankOrder, RankedDoc, Run};

pub const S_RARE_ID: &str = "S_rare";
pub const S_COMMON_ID: &str = "S_common";

/// Judged depth of the synthetic pool: retrieved non-relevant documents
/// above this rank get an explicit grade 0.
const JUDGED_DEPTH: usize = 100;

const WEIGHT_STREAM: u64 = 1 << 40;
const PICK_STREAM: u64 = 2 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SynthSpec {
    pub n_systems: usize,
    pub n_topics: usize,
    pub n_relevant_per_topic: usize,
    pub doc_pool_size: usize,
    /// Probability in [0, 1] that a rank position is filled from the shared
    /// consensus list of relevant documents.
    pub overlap_bias: f64,
    pub run_depth: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_systems: 20,
            n_topics: 25,
            n_relevant_per_topic: 50,
            doc_pool_size: 2000,
            overlap_bias: 0.3,
            run_depth: 100,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_systems == 0 || self.n_topics == 0 {
            return fail("need at least one system and one topic".into());
        }
        if self.n_relevant_per_topic == 0 || self.n_relevant_per_topic > self.doc_pool_size {
            return fail(format!(
                "relevant documents per topic must be in 1..={} (the pool size), got {}",
                self.doc_pool_size, self.n_relevant_per_topic
            ));
        }
        if self.run_depth == 0 || self.run_depth > self.doc_pool_size {
            return fail(format!(
                "run depth must be in 1..={} (the pool size), got {}",
                self.doc_pool_size, self.run_depth
            ));
        }
        if !(0.0..=1.0).contains(&self.overlap_bias) {
            return fail(format!("overlap bias must be in [0, 1], got {}", self.overlap_bias));
        }
        Ok(())
    }
}

pub fn system_id(s: usize) -> String {
    format!("sys{s:03}")
}

pub fn topic_id(t: usize) -> String {
    format!("t{t:03}")
}

fn doc_id(topic: &str, d: usize) -> String {
    format!("{topic}-d{d:06}")
}

/// Generates a campaign that is a pure function of `spec`.
pub fn generate_campaign(spec: &SynthSpec) -> Result<Campaign> {
    spec.validate()?;
    let pool = spec.doc_pool_size;

    struct TopicPlan {
        relevant: Vec<bool>,
        consensus: Vec<usize>,
    }
    let plans: Vec<TopicPlan> = (0..spec.n_topics)
        .map(|t| {
            let mut rng = trial_rng(spec.seed, t as u64);
            let mut consensus = sample(&mut rng, pool, spec.n_relevant_per_topic).into_vec();
            consensus.shuffle(&mut rng);
            let mut relevant = vec![false; pool];
            for &d in &consensus {
                relevant[d] = true;
            }
            TopicPlan { relevant, consensus }
        })
        .collect();

    // How strongly a system's own draws favour relevant documents.
    let weights: Vec<f64> = (0..spec.n_systems)
        .map(|s| {
            let u: f64 = trial_rng(spec.seed, WEIGHT_STREAM + s as u64).random();
            1.0 + 19.0 * u * u
        })
        .collect();

    let mut retrieved_nonrel: Vec<HashSet<usize>> = vec![HashSet::new(); spec.n_topics];
    let mut runs = Vec::with_capacity(spec.n_systems);
    for (s, &weight) in weights.iter().enumerate() {
        let mut rankings = BTreeMap::new();
        for (t, plan) in plans.iter().enumerate() {
            let stream = PICK_STREAM + (s * spec.n_topics + t) as u64;
            let mut rng = trial_rng(spec.seed, stream);
            let picks = system_ranking((&plan.relevant, &plan.consensus), weight, spec, &mut rng);
            let topic = topic_id(t);
            let docs = picks
                .iter()
                .enumerate()
                .map(|(i, &d)| {
                    if i < JUDGED_DEPTH && !plan.relevant[d] {
                        retrieved_nonrel[t].insert(d);
                    }
                    RankedDoc::new(doc_id(&topic, d), (spec.run_depth - i) as f64, i as i64 + 1)
                })
                .collect();
            rankings.insert(topic, docs);
        }
        runs.push(Run::new(system_id(s), rankings, RankOrder::Score)?);
    }

    let mut qrels = Qrels::new(1)?;
    for (t, plan) in plans.iter().enumerate() {
        let topic = topic_id(t);
        for &d in &plan.consensus {
            qrels.add_judgment(&topic, &doc_id(&topic, d), 1)?;
        }
        for &d in &retrieved_nonrel[t] {
            qrels.add_judgment(&topic, &doc_id(&topic, d), 0)?;
        }
    }
    Campaign::new(runs, qrels)
}

fn system_ranking<R: Rng>(
    (relevant, consensus): (&[bool], &[usize]),
    weight: f64,
    spec: &SynthSpec,
    rng: &mut R,
) -> Vec<usize> {
    // Weighted order without replacement over the whole pool: sort by
    // ln(u) / w, largest first.
    let mut private: Vec<(f64, usize)> = (0..relevant.len())
        .map(|d| {
            let u = 1.0 - rng.random::<f64>();
            let w = if relevant[d] { weight } else { 1.0 };
            (u.ln() / w, d)
        })
        .collect();
    private.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut used = vec![false; relevant.len()];
    let mut out = Vec::with_capacity(spec.run_depth);
    let (mut ci, mut pi) = (0, 0);
    while out.len() < spec.run_depth {
        let mut pick = None;
        if rng.random::<f64>() < spec.overlap_bias {
            while ci < consensus.len() && pick.is_none() {
                if !used[consensus[ci]] {
                    pick = Some(consensus[ci]);
                }
                ci += 1;
            }
        }
        while pick.is_none() {
            let d = private[pi].1;
            pi += 1;
            if !used[d] {
                pick = Some(d);
            }
        }
        let d = pick.unwrap();
        used[d] = true;
        out.push(d);
    }
    out
}

/// What fills a hypothetical run below its D relevant documents.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pad {
    /// The run holds exactly D documents.
    None,
    /// Padded to `max(D, cutoff)` with judged non-relevant documents of the
    /// topic in id order, then with fresh unjudged ids.
    #[default]
    PoolNonrel,
}

impl FromStr for Pad {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Pad::None),
            "pool-nonrel" => Ok(Pad::PoolNonrel),
            _ => Err(Error::Config(format!("unknown padding `{s}` (expected none or pool-nonrel)"))),
        }
    }
}

impl fmt::Display for Pad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pad::None => "none",
            Pad::PoolNonrel => "pool-nonrel",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HypotheticalKind {
    Rare,
    Common,
}

impl HypotheticalKind {
    pub fn system_id(self) -> &'static str {
        match self {
            HypotheticalKind::Rare => S_RARE_ID,
            HypotheticalKind::Common => S_COMMON_ID,
        }
    }
}

impl FromStr for HypotheticalKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rare" => Ok(HypotheticalKind::Rare),
            "common" => Ok(HypotheticalKind::Common),
            _ => Err(Error::Config(format!("unknown hypothetical system `{s}` (expected rare or common)"))),
        }
    }
}

impl fmt::Display for HypotheticalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HypotheticalKind::Rare => "rare",
            HypotheticalKind::Common => "common",
        })
    }
}

/// How a hypothetical run is laid out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HypotheticalOptions {
    pub pad: Pad,
    /// Padding depth lower bound, normally the metric cutoff.
    pub cutoff: usize,
    /// Depth used to rank relevant documents by commonness.
    pub count_depth: CountDepth,
}

impl Default for HypotheticalOptions {
    fn default() -> Self {
        HypotheticalOptions {
            pad: Pad::PoolNonrel,
            cutoff: 100,
            count_depth: CountDepth::Unlimited,
        }
    }
}

fn rare_doc(topic: &str, i: usize) -> String {
    format!("__rare__{topic}__{i}")
}

fn check_topic(campaign: &Campaign, topic: &str) -> Result<()> {
    if campaign.qrels().has_topic(topic) {
        Ok(())
    } else {
        Err(Error::UnknownTopic(topic.to_string()))
    }
}

fn check_d(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::Config("a hypothetical system needs D >= 1 relevant documents".into()));
    }
    Ok(())
}

/// Appends padding to `docs` according to `opts` and assigns descending scores.
fn finish_ranking(campaign: &Campaign, topic: &str, mut docs: Vec<String>, opts: &HypotheticalOptions) -> Vec<RankedDoc> {
    if opts.pad == Pad::PoolNonrel {
        let target = docs.len().max(opts.cutoff);
        let taken: HashSet<String> = docs.iter().cloned().collect();
        let qrels = campaign.qrels();
        let threshold = qrels.relevance_threshold();
        let judged_nonrel = qrels
            .judgments()
            .get(topic)
            .into_iter()
            .flat_map(|m| m.iter())
            .filter(|(d, &g)| g < threshold && !taken.contains(d.as_str()))
            .map(|(d, _)| d.clone());
        let fresh = (0..).map(|i| format!("__pad__{topic}__{i}"));
        let need = target - docs.len();
        docs.extend(judged_nonrel.chain(fresh).take(need));
    }
    let n = docs.len();
    docs.into_iter()
        .enumerate()
        .map(|(i, d)| RankedDoc::new(d, (n - i) as f64, i as i64 + 1))
        .collect()
}

fn rare_rankings(
    campaign: &Campaign,
    topics: &[&str],
    d: usize,
    opts: &HypotheticalOptions,
) -> Result<(Run, Qrels)> {
    check_d(d)?;
    let mut qrels = campaign.qrels().clone();
    let grade = qrels.relevance_threshold();
    let mut rankings = BTreeMap::new();
    for &topic in topics {
        check_topic(campaign, topic)?;
        let docs: Vec<String> = (0..d).map(|i| rare_doc(topic, i)).collect();
        for doc in &docs {
            qrels.add_judgment(topic, doc, grade)?;
        }
        rankings.insert(topic.to_string(), finish_ranking(campaign, topic, docs, opts));
    }
    Ok((Run::new(S_RARE_ID, rankings, RankOrder::Score)?, qrels))
}

/// Relevant documents of `topic` retrieved by at least one system, most
/// common first, ties by ascending doc-id.
pub fn common_relevant(campaign: &Campaign, index: &RarityIndex, topic: &str) -> Vec<(String, u32)> {
    let qrels = campaign.qrels();
    let topic_rarity = index.topic(topic);
    let mut docs: Vec<(String, u32)> = qrels
        .relevant_docs(topic)
        .map(|d| (d.to_string(), topic_rarity.count(d)))
        .filter(|(_, c)| *c > 0)
        .collect();
    docs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    docs
}

fn common_rankings(
    campaign: &Campaign,
    topics: &[&str],
    d: usize,
    opts: &HypotheticalOptions,
) -> Result<Run> {
    check_d(d)?;
    let index = RarityIndex::build(campaign, opts.count_depth);
    let mut rankings = BTreeMap::new();
    for &topic in topics {
        check_topic(campaign, topic)?;
        let common = common_relevant(campaign, &index, topic);
        if d > common.len() {
            return Err(Error::Config(format!(
                "topic `{topic}` has only {} retrieved relevant documents; D can be at most {}",
                common.len(),
                common.len()
            )));
        }
        let docs = common.into_iter().take(d).map(|(doc, _)| doc).collect();
        rankings.insert(topic.to_string(), finish_ranking(campaign, topic, docs, opts));
    }
    Run::new(S_COMMON_ID, rankings, RankOrder::Score)
}

/// A run of `d` fresh relevant documents that no existing run retrieved,
/// with the qrels extended to judge them relevant.
pub fn make_s_rare(campaign: &Campaign, topic: &str, d: usize, opts: &HypotheticalOptions) -> Result<(Run, Qrels)> {
    rare_rankings(campaign, &[topic], d, opts)
}

/// A run of the `d` most commonly retrieved relevant documents of `topic`.
pub fn make_s_common(campaign: &Campaign, topic: &str, d: usize, opts: &HypotheticalOptions) -> Result<Run> {
    common_rankings(campaign, &[topic], d, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryOptions {
    pub kind: HypotheticalKind,
    /// Topics averaged over; one topic reproduces a single-query trajectory.
    pub topics: Vec<String>,
    pub alphas: Vec<f64>,
    pub d_max: usize,
    /// Metric whose alpha is swept; the configured alpha is ignored.
    pub metric: Metric,
    pub eval: EvalOptions,
    pub pad: Pad,
    /// Score the other systems against the original qrels, so the fresh
    /// relevant documents of S_rare do not raise their N_R.
    pub freeze_relevant_counts: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryResult {
    pub alpha: f64,
    /// `(D, midrank of the hypothetical system)` for D = 1..=d_max.
    pub ranks: Vec<(usize, f64)>,
    /// Least D at which the hypothetical system ranks first outright.
    pub d_star: Option<usize>,
}

/// Rank of the hypothetical system, counted among S + 1 systems, for every
/// `alpha` and every D in `1..=d_max`.
pub fn rank_trajectory(
    campaign: &Campaign,
    opts: &TrajectoryOptions,
    exec: Execution,
) -> Result<Vec<TrajectoryResult>> {
    if opts.d_max == 0 {
        return Err(Error::Config("D_max must be at least 1".into()));
    }
    if opts.topics.is_empty() {
        return Err(Error::Config("trajectory needs at least one topic".into()));
    }
    let metrics: Vec<Metric> = opts.alphas.iter().map(|&a| opts.metric.with_alpha(a)).collect();
    for m in &metrics {
        m.validate()?;
    }
    let base = restrict_topics(campaign, &opts.topics)?;
    let topics: Vec<&str> = opts.topics.iter().map(String::as_str).collect();
    let hyp = HypotheticalOptions {
        pad: opts.pad,
        cutoff: opts.metric.config.cutoff,
        count_depth: opts.eval.count_depth,
    };
    let id = opts.kind.system_id();

    let per_d = exec.try_map(opts.d_max, |i| -> Result<Vec<f64>> {
        let d = i + 1;
        let (run, qrels) = match opts.kind {
            HypotheticalKind::Rare => rare_rankings(&base, &topics, d, &hyp)?,
            HypotheticalKind::Common => (common_rankings(&base, &topics, d, &hyp)?, base.qrels().clone()),
        };
        let joined = base.with_run(run)?;
        let index = RarityIndex::build(&joined, opts.eval.count_depth);
        let runs: Vec<&Run> = joined.runs().iter().collect();
        let (others, hyp_run) = runs.split_at(runs.len() - 1);
        let other_qrels = if opts.freeze_relevant_counts { base.qrels() } else { &qrels };
        let m_others = evaluate_with_index(others, other_qrels, &index, &metrics, &opts.eval, Execution::Sequential)?;
        let m_hyp = evaluate_with_index(hyp_run, &qrels, &index, &metrics, &opts.eval, Execution::Sequential)?;
        m_others
            .iter()
            .zip(&m_hyp)
            .map(|(o, h)| {
                let mut means = mean_scores(o)?;
                means.extend(mean_scores(h)?);
                let ranking = rank_systems(&means);
                Ok(ranking.rank_of(id).expect("hypothetical system is ranked"))
            })
            .collect()
    })?;

    Ok(opts
        .alphas
        .iter()
        .enumerate()
        .map(|(a, &alpha)| {
            let ranks: Vec<(usize, f64)> = per_d.iter().enumerate().map(|(i, r)| (i + 1, r[a])).collect();
            let d_star = ranks.iter().find(|(_, r)| *r == 1.0).map(|(d, _)| *d);
            TrajectoryResult { alpha, ranks, d_star }
        })
        .collect())
}

/// The campaign with runs and qrels cut down to `topics`.
fn restrict_topics(campaign: &Campaign, topics: &[String]) -> Result<Campaign> {
    let qrels_all = campaign.qrels();
    let mut qrels = Qrels::new(qrels_all.relevance_threshold())?;
    for topic in topics {
        let judged = qrels_all
            .judgments()
            .get(topic)
            .ok_or_else(|| Error::UnknownTopic(topic.clone()))?;
        for (doc, &grade) in judged {
            qrels.add_judgment(topic, doc, grade)?;
        }
    }
    let runs = campaign
        .runs()
        .iter()
        .map(|r| {
            let rankings = topics
                .iter()
                .filter(|t| r.has_topic(t))
                .map(|t| (t.clone(), r.ranking(t).to_vec()))
                .collect();
            Run::new(r.system_id(), rankings, RankOrder::Score)
        })
        .collect::<Result<Vec<_>>>()?;
    Campaign::new(runs, qrels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricDefaults;
    use crate::rarity::tests::toy4;
    use crate::rarity::{rarity_value, RarityVariant};
    use proptest::prelude::*;

    fn small(seed: u64, bias: f64) -> SynthSpec {
        SynthSpec {
            n_systems: 8,
            n_topics: 4,
            n_relevant_per_topic: 10,
            doc_pool_size: 200,
            overlap_bias: bias,
            run_depth: 30,
            seed,
        }
    }

    fn mean_relevant_count(c: &Campaign) -> f64 {
        let idx = RarityIndex::build(c, CountDepth::Unlimited);
        let (mut sum, mut n) = (0.0, 0.0);
        for topic in c.judged_topics() {
            for doc in c.qrels().relevant_docs(&topic) {
                let k = idx.count(&topic, doc);
                if k > 0 {
                    sum += k as f64;
                    n += 1.0;
                }
            }
        }
        sum / n
    }

    #[test]
    fn deterministic() {
        let a = generate_campaign(&small(3, 0.4)).unwrap();
        let b = generate_campaign(&small(3, 0.4)).unwrap();
        assert_eq!(a, b);
        let c = generate_campaign(&small(4, 0.4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn full_overlap_concentrates() {
        let c = generate_campaign(&small(1, 1.0)).unwrap();
        let idx = RarityIndex::build(&c, CountDepth::Unlimited);
        for topic in c.judged_topics() {
            for doc in c.qrels().relevant_docs(&topic) {
                assert_eq!(idx.count(&topic, doc), 8, "{topic} {doc}");
            }
        }
    }

    #[test]
    fn zero_overlap_on_large_pool_is_mostly_unique() {
        for seed in 0..5 {
            let spec = SynthSpec {
                n_systems: 5,
                n_topics: 3,
                n_relevant_per_topic: 2000,
                doc_pool_size: 200_000,
                overlap_bias: 0.0,
                run_depth: 20,
                seed,
            };
            let c = generate_campaign(&spec).unwrap();
            let idx = RarityIndex::build(&c, CountDepth::Unlimited);
            let (mut ones, mut total) = (0, 0);
            for topic in c.judged_topics() {
                for doc in c.qrels().relevant_docs(&topic) {
                    match idx.count(&topic, doc) {
                        0 => {}
                        1 => {
                            ones += 1;
                            total += 1;
                        }
                        _ => total += 1,
                    }
                }
            }
            assert!(total > 0 && ones * 10 >= total * 9, "seed {seed}: {ones}/{total}");
        }
    }

    #[test]
    fn overlap_raises_counts() {
        let lo: f64 = (0..5).map(|s| mean_relevant_count(&generate_campaign(&small(s, 0.1)).unwrap())).sum();
        let hi: f64 = (0..5).map(|s| mean_relevant_count(&generate_campaign(&small(s, 0.8)).unwrap())).sum();
        assert!(hi > lo, "{hi} <= {lo}");
    }

    #[test]
    fn infeasible_specs() {
        let mut s = small(0, 0.5);
        s.run_depth = 201;
        assert!(generate_campaign(&s).is_err());
        let mut s = small(0, 0.5);
        s.n_relevant_per_topic = 0;
        assert!(generate_campaign(&s).is_err());
        let mut s = small(0, 0.5);
        s.overlap_bias = 1.5;
        assert!(generate_campaign(&s).is_err());
    }

    #[test]
    fn s_rare_docs_are_fresh() {
        let c = toy4();
        let (run, qrels) = make_s_rare(&c, "t1", 3, &HypotheticalOptions { pad: Pad::None, ..Default::default() }).unwrap();
        assert_eq!(run.ranking("t1").len(), 3);
        let joined = c.with_run(run).unwrap().with_qrels(qrels);
        let idx = RarityIndex::build(&joined, CountDepth::Unlimited);
        for d in joined.run(S_RARE_ID).unwrap().ranking("t1") {
            assert!(d.doc_id.starts_with("__rare__"));
            assert_eq!(idx.count("t1", &d.doc_id), 1);
            assert!(joined.qrels().is_relevant("t1", &d.doc_id));
            let r = idx.rarity("t1", &d.doc_id, RarityVariant::Standard).unwrap();
            assert_eq!(r, 1.0 - 1.0 / 5.0);
            assert_eq!(r, rarity_value(5, 1, RarityVariant::Standard));
        }
        assert!(make_s_rare(&c, "t1", 0, &HypotheticalOptions::default()).is_err());
        assert!(make_s_rare(&c, "nope", 1, &HypotheticalOptions::default()).is_err());
    }

    #[test]
    fn padding() {
        let c = toy4();
        let opts = HypotheticalOptions { pad: Pad::PoolNonrel, cutoff: 5, count_depth: CountDepth::Unlimited };
        let (run, _) = make_s_rare(&c, "t1", 2, &opts).unwrap();
        let ids: Vec<&str> = run.ranking("t1").iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["__rare__t1__0", "__rare__t1__1", "d4", "__pad__t1__0", "__pad__t1__1"]);
    }

    #[test]
    fn s_common_on_toy4() {
        let c = toy4();
        let opts = HypotheticalOptions { pad: Pad::None, ..Default::default() };
        let ids = |d| -> Vec<String> {
            make_s_common(&c, "t1", d, &opts).unwrap().ranking("t1").iter().map(|x| x.doc_id.clone()).collect()
        };
        assert_eq!(ids(3), ["d1", "d2", "d3"]);
        assert_eq!(ids(1), ["d1"]);
        let err = make_s_common(&c, "t1", 4, &opts).unwrap_err().to_string();
        assert!(err.contains("at most 3"), "{err}");
    }

    #[test]
    fn common_ties_break_by_doc_id() {
        let c = generate_campaign(&small(7, 0.0)).unwrap();
        let idx = RarityIndex::build(&c, CountDepth::Unlimited);
        let list = common_relevant(&c, &idx, "t000");
        for w in list.windows(2) {
            assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
    }

    fn trajectory(c: &Campaign, kind: HypotheticalKind, alphas: &[f64], d_max: usize) -> Vec<TrajectoryResult> {
        let metric = Metric::parse("P@10_rareness", &MetricDefaults::default()).unwrap();
        let opts = TrajectoryOptions {
            kind,
            topics: vec!["t000".into()],
            alphas: alphas.to_vec(),
            d_max,
            metric,
            eval: EvalOptions::default(),
            pad: Pad::PoolNonrel,
            freeze_relevant_counts: false,
        };
        rank_trajectory(c, &opts, Execution::Parallel).unwrap()
    }

    #[test]
    fn rare_trajectory_is_monotone_and_ordered() {
        let c = generate_campaign(&small(2, 0.3)).unwrap();
        let res = trajectory(&c, HypotheticalKind::Rare, &[0.0, 0.5, 1.0], 10);
        for r in &res {
            for w in r.ranks.windows(2) {
                assert!(w[1].1 <= w[0].1, "alpha {}: {:?}", r.alpha, r.ranks);
            }
        }
        let ds: Vec<usize> = res.iter().map(|r| r.d_star.unwrap_or(usize::MAX)).collect();
        assert!(ds[2] <= ds[1] && ds[1] <= ds[0], "{ds:?}");
        assert_eq!(res[0].ranks.len(), 10);
    }

    #[test]
    fn rare_and_common_coincide_at_alpha_zero() {
        let c = generate_campaign(&small(5, 0.5)).unwrap();
        let idx = RarityIndex::build(&c, CountDepth::Unlimited);
        let avail = common_relevant(&c, &idx, "t000").len().min(10);
        let rare = trajectory(&c, HypotheticalKind::Rare, &[0.0], avail);
        let common = trajectory(&c, HypotheticalKind::Common, &[0.0], avail);
        assert_eq!(rare[0].ranks, common[0].ranks);
    }

    #[test]
    fn no_crossing_means_no_d_star() {
        let c = generate_campaign(&small(2, 0.9)).unwrap();
        let res = trajectory(&c, HypotheticalKind::Rare, &[0.0], 1);
        assert!(res[0].ranks[0].1 > 1.0);
        assert_eq!(res[0].d_star, None);
    }

    #[test]
    fn rare_scores_exceed_alpha_zero() {
        let c = toy4();
        let (run, qrels) = make_s_rare(&c, "t1", 2, &HypotheticalOptions::default()).unwrap();
        let joined = c.with_run(run).unwrap().with_qrels(qrels);
        let idx = RarityIndex::build(&joined, CountDepth::Unlimited);
        let j = joined.qrels().topic("t1");
        let r = idx.topic("t1");
        let ranking = joined.run(S_RARE_ID).unwrap().ranking("t1");
        let at = |a: f64| {
            Metric::parse("P@3_rareness", &MetricDefaults::default())
                .unwrap()
                .with_alpha(a)
                .evaluate(ranking, &j, &r)
                .unwrap()
        };
        assert!(at(0.5) > at(0.0));
        assert_eq!(at(0.0), 2.0 / 3.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generated_runs_are_valid(seed in any::<u64>(), bias in 0.0f64..=1.0, n_rel in 1usize..20) {
            let spec = SynthSpec { n_relevant_per_topic: n_rel, overlap_bias: bias, ..small(seed, 0.0) };
            let c = generate_campaign(&spec).unwrap();
            prop_assert_eq!(c.num_systems(), 8);
            for r in c.runs() {
                for t in c.judged_topics() {
                    prop_assert_eq!(r.ranking(&t).len(), 30);
                }
            }
            for t in c.judged_topics() {
                prop_assert_eq!(c.qrels().num_relevant(&t), n_rel);
            }
        }
    }
}
