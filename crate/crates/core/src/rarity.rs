//! Cross-system retrieval counts and document rarity.
//!
//! For a campaign of `S` systems, `S_d` is the number of systems whose
//! ranking for a topic contains document `d`. Rarity is
//! `R(d) = 1 - S_d / S`; the revised form `R'(d) = 1 - (S_d - 1) / (S - 1)`
//! stretches the same quantity onto `[0, 1]`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trec_io::{Campaign, Run};

/// How deep into each ranking a retrieval is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CountDepth {
    #[default]
    Unlimited,
    Limited(usize),
}

impl CountDepth {
    pub fn take(self, len: usize) -> usize {
        match self {
            CountDepth::Unlimited => len,
            CountDepth::Limited(d) => d.min(len),
        }
    }
}

impl FromStr for CountDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unlimited" | "full" => Ok(CountDepth::Unlimited),
            n => match n.parse::<usize>() {
                Ok(d) if d >= 1 => Ok(CountDepth::Limited(d)),
                _ => Err(Error::Config(format!(
                    "rarity depth must be a positive integer or `unlimited`, got `{s}`"
                ))),
            },
        }
    }
}

impl Serialize for CountDepth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for CountDepth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountDepth::Unlimited => f.write_str("unlimited"),
            CountDepth::Limited(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RarityVariant {
    /// `1 - S_d / S`, in `[0, (S - 1) / S]`.
    #[default]
    Standard,
    /// `1 - (S_d - 1) / (S - 1)`, in `[0, 1]`.
    Revised,
}

impl RarityVariant {
    /// Token used in metric names and on the command line.
    pub fn token(self) -> &'static str {
        match self {
            RarityVariant::Standard => "eq2",
            RarityVariant::Revised => "revised",
        }
    }
}

impl FromStr for RarityVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq2" | "standard" => Ok(RarityVariant::Standard),
            "revised" => Ok(RarityVariant::Revised),
            _ => Err(Error::Config(format!(
                "unknown rarity variant `{s}` (expected `eq2` or `revised`)"
            ))),
        }
    }
}

impl fmt::Display for RarityVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Rarity of a document retrieved by `count` of `total` systems.
///
/// `count` must be in `1..=total`. With a single system the standard form is
/// 0 and the revised form is defined as 1.
pub fn rarity_value(total: usize, count: u32, variant: RarityVariant) -> f64 {
    debug_assert!(count >= 1 && count as usize <= total);
    match variant {
        RarityVariant::Standard => 1.0 - count as f64 / total as f64,
        RarityVariant::Revised if total == 1 => 1.0,
        RarityVariant::Revised => 1.0 - (count - 1) as f64 / (total - 1) as f64,
    }
}

/// Frozen retrieval counts for one campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct RarityIndex {
    total_systems: usize,
    depth: CountDepth,
    counts: HashMap<String, HashMap<String, u32>>,
}

impl RarityIndex {
    pub fn build(campaign: &Campaign, depth: CountDepth) -> RarityIndex {
        Self::from_runs(campaign.runs(), depth).expect("campaign has at least one run")
    }

    /// Counts over an arbitrary set of runs; `S` is the number of runs given.
    pub fn from_runs<'a, I>(runs: I, depth: CountDepth) -> Result<RarityIndex>
    where
        I: IntoIterator<Item = &'a Run>,
    {
        let mut total_systems = 0;
        let mut counts: HashMap<String, HashMap<String, u32>> = HashMap::new();
        for run in runs {
            total_systems += 1;
            for (topic, docs) in run.rankings() {
                let n = depth.take(docs.len());
                if n == 0 {
                    continue;
                }
                let topic_counts = counts.entry(topic.clone()).or_default();
                // Documents are unique within a ranking, so each hit is a distinct system.
                for d in &docs[..n] {
                    match topic_counts.get_mut(d.doc_id.as_str()) {
                        Some(c) => *c += 1,
                        None => {
                            topic_counts.insert(d.doc_id.clone(), 1);
                        }
                    }
                }
            }
        }
        if total_systems == 0 {
            return Err(Error::EmptyCampaign);
        }
        if total_systems == 1 {
            log::warn!("rarity over a single system is degenerate: R(d) = 0 and R'(d) = 1");
        }
        Ok(RarityIndex {
            total_systems,
            depth,
            counts,
        })
    }

    /// S.
    pub fn total_systems(&self) -> usize {
        self.total_systems
    }

    pub fn depth(&self) -> CountDepth {
        self.depth
    }

    /// S_d, or 0 if no system retrieved the document at the counted depth.
    pub fn count(&self, topic: &str, doc: &str) -> u32 {
        self.topic(topic).count(doc)
    }

    pub fn topic(&self, topic: &str) -> TopicRarity<'_> {
        TopicRarity {
            total_systems: self.total_systems,
            counts: self.counts.get(topic),
        }
    }

    pub fn rarity(&self, topic: &str, doc: &str, variant: RarityVariant) -> Result<f64> {
        match self.count(topic, doc) {
            0 => Err(Error::UnretrievedDocument {
                topic: topic.to_string(),
                doc: doc.to_string(),
            }),
            c => Ok(rarity_value(self.total_systems, c, variant)),
        }
    }

    pub fn rareness(&self, topic: &str, doc: &str) -> Result<f64> {
        self.rarity(topic, doc, RarityVariant::Standard)
    }

    pub fn rareness_revised(&self, topic: &str, doc: &str) -> Result<f64> {
        self.rarity(topic, doc, RarityVariant::Revised)
    }

    /// Number of indexed (topic, doc) pairs.
    pub fn len(&self) -> usize {
        self.counts.values().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Counts for one topic.
#[derive(Clone, Copy, Debug)]
pub struct TopicRarity<'a> {
    total_systems: usize,
    counts: Option<&'a HashMap<String, u32>>,
}

impl<'a> TopicRarity<'a> {
    pub fn count(&self, doc: &str) -> u32 {
        self.counts
            .and_then(|m| m.get(doc))
            .copied()
            .unwrap_or(0)
    }

    pub fn total_systems(&self) -> usize {
        self.total_systems
    }

    /// Rarity of a document the evaluated system itself retrieved. That
    /// system always counts towards S_d, so a document beyond a limited
    /// count depth is treated as S_d = 1.
    pub fn rarity_of_retrieved(&self, doc: &str, variant: RarityVariant) -> f64 {
        rarity_value(self.total_systems, self.count(doc).max(1), variant)
    }

    /// Iterates over (doc, S_d) pairs in arbitrary order.
    pub fn iter(&self) -> impl Iterator<Item = (&'a str, u32)> {
        self.counts
            .into_iter()
            .flat_map(|m| m.iter().map(|(d, &c)| (d.as_str(), c)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RarityRow {
    pub topic: String,
    pub doc: String,
    pub grade: u32,
    pub count: u32,
    pub rarity: f64,
}

/// Relevant documents of `topic` that at least one system retrieved, most
/// rare first (ties by ascending doc-id).
pub fn rarity_report(
    campaign: &Campaign,
    index: &RarityIndex,
    topic: &str,
    variant: RarityVariant,
) -> Result<Vec<RarityRow>> {
    let qrels = campaign.qrels();
    if !qrels.has_topic(topic) {
        return Err(Error::UnknownTopic(topic.to_string()));
    }
    let view = index.topic(topic);
    let mut rows: Vec<RarityRow> = qrels
        .relevant_docs(topic)
        .filter_map(|doc| {
            let count = view.count(doc);
            (count > 0).then(|| RarityRow {
                topic: topic.to_string(),
                doc: doc.to_string(),
                grade: qrels.grade(topic, doc).unwrap_or(0),
                count,
                rarity: rarity_value(index.total_systems(), count, variant),
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        b.rarity
            .total_cmp(&a.rarity)
            .then_with(|| a.doc.as_bytes().cmp(b.doc.as_bytes()))
    });
    Ok(rows)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::trec_io::{parse_qrels_str, parse_run_str, Campaign};
    use proptest::prelude::*;

    /// S = 4, one topic; A=[d1,d2,d4] B=[d1,d3,d5] C=[d1,d2,d6] D=[d1,d4,d5];
    /// d1, d2, d3 relevant.
    pub(crate) fn toy4() -> Campaign {
        let lists = [
            ("A", ["d1", "d2", "d4"]),
            ("B", ["d1", "d3", "d5"]),
            ("C", ["d1", "d2", "d6"]),
            ("D", ["d1", "d4", "d5"]),
        ];
        let runs = lists
            .iter()
            .map(|(sys, docs)| {
                let text: String = docs
                    .iter()
                    .enumerate()
                    .map(|(i, d)| format!("t1 Q0 {d} {} {} {sys}\n", i + 1, 10 - i))
                    .collect();
                parse_run_str(&text, &Default::default()).unwrap()
            })
            .collect();
        let qrels = parse_qrels_str("t1 0 d1 1\nt1 0 d2 1\nt1 0 d3 1\nt1 0 d4 0\nt2 0 d9 0\n", 1)
            .unwrap();
        Campaign::new(runs, qrels).unwrap()
    }

    #[test]
    fn toy4_counts() {
        let c = toy4();
        let idx = RarityIndex::build(&c, CountDepth::Unlimited);
        assert_eq!(idx.total_systems(), 4);
        assert_eq!(idx.count("t1", "d1"), 4);
        assert_eq!(idx.count("t1", "d2"), 2);
        assert_eq!(idx.count("t1", "d3"), 1);
        assert_eq!(idx.count("t1", "d5"), 2);
        assert_eq!(idx.count("t1", "zz"), 0);
        assert_eq!(idx.len(), 6);

        let shallow = RarityIndex::build(&c, CountDepth::Limited(1));
        assert_eq!(shallow.count("t1", "d1"), 4);
        assert_eq!(shallow.count("t1", "d2"), 0);
        assert!(shallow.rareness("t1", "d2").is_err());
    }

    #[test]
    fn rarity_values() {
        assert_eq!(rarity_value(4, 4, RarityVariant::Standard), 0.0);
        assert_eq!(rarity_value(4, 1, RarityVariant::Standard), 0.75);
        assert_eq!(rarity_value(2, 1, RarityVariant::Standard), 0.5);
        assert_eq!(rarity_value(4, 1, RarityVariant::Revised), 1.0);
        assert_eq!(rarity_value(4, 4, RarityVariant::Revised), 0.0);
        assert!((rarity_value(4, 2, RarityVariant::Revised) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(rarity_value(1, 1, RarityVariant::Standard), 0.0);
        assert_eq!(rarity_value(1, 1, RarityVariant::Revised), 1.0);
    }

    #[test]
    fn unretrieved_document_is_an_error() {
        let idx = RarityIndex::build(&toy4(), CountDepth::Unlimited);
        assert!(matches!(
            idx.rareness("t1", "nope"),
            Err(Error::UnretrievedDocument { .. })
        ));
        assert_eq!(idx.rareness("t1", "d3").unwrap(), 0.75);
        assert_eq!(idx.rareness_revised("t1", "d3").unwrap(), 1.0);
    }

    #[test]
    fn report_orders_by_rarity() {
        let c = toy4();
        let idx = RarityIndex::build(&c, CountDepth::Unlimited);
        let rows = rarity_report(&c, &idx, "t1", RarityVariant::Standard).unwrap();
        let got: Vec<_> = rows.iter().map(|r| (r.doc.as_str(), r.rarity)).collect();
        assert_eq!(got, [("d3", 0.75), ("d2", 0.5), ("d1", 0.0)]);
        let revised = rarity_report(&c, &idx, "t1", RarityVariant::Revised).unwrap();
        assert_eq!(revised[0].doc, "d3");
        assert_eq!(revised[0].rarity, 1.0);
        assert!(rarity_report(&c, &idx, "t2", RarityVariant::Standard)
            .unwrap()
            .is_empty());
        assert!(rarity_report(&c, &idx, "t7", RarityVariant::Standard).is_err());
    }

    #[test]
    fn ties_in_report_sort_by_doc_id() {
        let run = |sys: &str| {
            parse_run_str(&format!("t Q0 b 1 2 {sys}\nt Q0 a 2 1 {sys}\n"), &Default::default())
                .unwrap()
        };
        let c = Campaign::new(
            vec![run("x"), run("y")],
            parse_qrels_str("t 0 a 1\nt 0 b 1\n", 1).unwrap(),
        )
        .unwrap();
        let idx = RarityIndex::build(&c, CountDepth::Unlimited);
        let rows = rarity_report(&c, &idx, "t", RarityVariant::Standard).unwrap();
        assert_eq!(rows[0].doc, "a");
        assert_eq!(rows[1].doc, "b");
    }

    #[test]
    fn revised_is_rescaled_standard_on_grid() {
        for s in 2..=50usize {
            for sd in 1..=s as u32 {
                let r = rarity_value(s, sd, RarityVariant::Standard);
                let rp = rarity_value(s, sd, RarityVariant::Revised);
                // 1 - 1/s and (s - 1)/s may round one ulp apart.
                assert!(r >= 0.0 && r <= (s - 1) as f64 / s as f64 + f64::EPSILON);
                assert!((0.0..=1.0).contains(&rp));
                assert!(rp >= r);
                assert!((rp - r * s as f64 / (s - 1) as f64).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn strictly_decreasing_in_count(s in 2usize..200, a in 1u32..200, b in 1u32..200) {
            let (a, b) = (a.min(s as u32), b.min(s as u32));
            prop_assume!(a < b);
            for v in [RarityVariant::Standard, RarityVariant::Revised] {
                prop_assert!(rarity_value(s, a, v) > rarity_value(s, b, v));
            }
        }

        #[test]
        fn adding_systems_moves_rarity(s in 1usize..100, sd_raw in 1u32..100) {
            let sd = sd_raw.min(s as u32);
            let r = rarity_value(s, sd, RarityVariant::Standard);
            // A newcomer that retrieves d.
            if (sd as usize) < s {
                prop_assert!(rarity_value(s + 1, sd + 1, RarityVariant::Standard) < r);
            }
            // A newcomer that does not.
            prop_assert!(rarity_value(s + 1, sd, RarityVariant::Standard) > r);
        }
    }

    #[test]
    fn adding_systems_checked_by_rebuilding_index() {
        let c = toy4();
        let before = RarityIndex::build(&c, CountDepth::Unlimited);
        let with_d2 = parse_run_str("t1 Q0 d2 1 1 E\n", &Default::default()).unwrap();
        let without = parse_run_str("t1 Q0 d9 1 1 F\n", &Default::default()).unwrap();
        let after_with = RarityIndex::build(&c.with_run(with_d2).unwrap(), CountDepth::Unlimited);
        let after_without =
            RarityIndex::build(&c.with_run(without).unwrap(), CountDepth::Unlimited);
        let r = before.rareness("t1", "d2").unwrap();
        assert!(after_with.rareness("t1", "d2").unwrap() < r);
        assert!(after_without.rareness("t1", "d2").unwrap() > r);
    }
}
