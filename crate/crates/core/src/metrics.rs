//! Per-topic effectiveness metrics.
//!
//! All metrics sum over ranks `1..=k` in ascending order. Positions past the
//! end of a ranking count as non-relevant. With `alpha = 0` every rareness
//! metric performs the same floating-point operations as its base metric and
//! returns the same bits.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rarity::{RarityVariant, TopicRarity};
use crate::trec_io::{RankedDoc, TopicJudgments};

/// Evaluation depth for the average-precision family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ApDepth {
    /// Sum over ranks `1..=cutoff`.
    #[default]
    Cutoff,
    /// Sum over the whole ranking.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum MetricKind {
    Precision,
    AveragePrecision,
    PrecisionRareness,
    AveragePrecisionRareness,
    PrecisionMixture,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Precision,
        MetricKind::AveragePrecision,
        MetricKind::PrecisionRareness,
        MetricKind::AveragePrecisionRareness,
        MetricKind::PrecisionMixture,
    ];

    pub fn is_ap_family(self) -> bool {
        matches!(
            self,
            MetricKind::AveragePrecision | MetricKind::AveragePrecisionRareness
        )
    }

    pub fn uses_rarity(self) -> bool {
        !matches!(self, MetricKind::Precision | MetricKind::AveragePrecision)
    }

    /// The unweighted metric this one generalises.
    pub fn base(self) -> MetricKind {
        if self.is_ap_family() {
            MetricKind::AveragePrecision
        } else {
            MetricKind::Precision
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricConfig {
    /// k, the rank cut-off.
    pub cutoff: usize,
    /// Weight on rarity.
    pub alpha: f64,
    pub rarity: RarityVariant,
    pub ap_depth: ApDepth,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            cutoff: 100,
            alpha: 0.0,
            rarity: RarityVariant::Standard,
            ap_depth: ApDepth::Cutoff,
        }
    }
}

/// A metric kind with its parameters. This is the full descriptor attached
/// to every score matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Metric {
    pub kind: MetricKind,
    pub config: MetricConfig,
}

impl Metric {
    pub fn new(kind: MetricKind, config: MetricConfig) -> Result<Metric> {
        let m = Metric { kind, config };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        if c.cutoff < 1 {
            return Err(Error::Config("cutoff k must be at least 1".into()));
        }
        if !c.alpha.is_finite() || c.alpha < 0.0 {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", c.alpha)));
        }
        if self.kind == MetricKind::PrecisionMixture && c.alpha > 1.0 {
            return Err(Error::Config(format!(
                "mixture metric requires alpha in [0, 1], got {}",
                c.alpha
            )));
        }
        Ok(())
    }

    /// Emits the advisory warning for additive metrics with `alpha > 1`.
    pub fn warn_if_unusual(&self) {
        if self.kind.uses_rarity() && self.kind != MetricKind::PrecisionMixture && self.config.alpha > 1.0 {
            log::warn!("{self}: alpha > 1 lets rarity outweigh relevance");
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Metric {
        Metric {
            config: MetricConfig { alpha, ..self.config },
            ..self
        }
    }

    /// The same parameters with the rarity reward removed.
    pub fn base(self) -> Metric {
        Metric {
            kind: self.kind.base(),
            ..self
        }
    }

    pub(crate) fn depth(&self, ranking_len: usize) -> usize {
        match (self.kind.is_ap_family(), self.config.ap_depth) {
            (true, ApDepth::Full) => ranking_len,
            _ => self.config.cutoff,
        }
    }

    /// Scores one ranking on one topic. `None` means the topic has no
    /// relevant documents and is skipped by the AP family.
    pub fn evaluate(
        &self,
        ranking: &[RankedDoc],
        judgments: &TopicJudgments<'_>,
        rarity: &TopicRarity<'_>,
    ) -> Option<f64> {
        let c = &self.config;
        match self.kind {
            MetricKind::Precision => Some(precision_at_k(ranking, judgments, c.cutoff)),
            MetricKind::PrecisionRareness => {
                Some(p_at_k_rareness(ranking, judgments, rarity, c))
            }
            MetricKind::PrecisionMixture => Some(kernels::mixture(
                gains(ranking, judgments, rarity, c.rarity),
                c.cutoff,
                c.alpha,
            )),
            MetricKind::AveragePrecision => average_precision(
                ranking,
                judgments,
                self.depth(ranking.len()),
                judgments.num_relevant(),
            ),
            MetricKind::AveragePrecisionRareness => kernels::ap_rareness(
                gains(ranking, judgments, rarity, c.rarity),
                self.depth(ranking.len()),
                c.alpha,
                judgments.num_relevant(),
            ),
        }
    }
}

/// Defaults applied when a metric name leaves a parameter out.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricDefaults {
    pub cutoff: usize,
    pub alpha: f64,
    pub rarity: RarityVariant,
    pub ap_depth: ApDepth,
}

impl Default for MetricDefaults {
    fn default() -> Self {
        MetricDefaults {
            cutoff: 100,
            alpha: 1.0,
            rarity: RarityVariant::Standard,
            ap_depth: ApDepth::Cutoff,
        }
    }
}

pub const VALID_METRIC_NAMES: &str =
    "P@k, AP, P@k_rareness, AP_rareness, P@k_mixture (k a positive integer, e.g. P@100_rareness; \
     optional parameters like P@100_rareness(alpha=0.5,rarity=eq2))";

impl Metric {
    /// Parses names such as `P@100`, `AP`, `P@10_rareness`,
    /// `AP_rareness(alpha=0.5,rarity=revised)` or `P@k_mixture`
    /// (`k` takes the default cutoff).
    pub fn parse(name: &str, defaults: &MetricDefaults) -> Result<Metric> {
        let unknown = || Error::UnknownMetric {
            name: name.to_string(),
            valid: VALID_METRIC_NAMES.to_string(),
        };
        let (head, params) = match name.find('(') {
            Some(i) if name.ends_with(')') => (&name[..i], Some(&name[i + 1..name.len() - 1])),
            Some(_) => return Err(unknown()),
            None => (name, None),
        };
        let (family, suffix) = match head.split_once('_') {
            Some((f, s)) => (f, Some(s)),
            None => (head, None),
        };
        let mut config = MetricConfig {
            cutoff: defaults.cutoff,
            alpha: defaults.alpha,
            rarity: defaults.rarity,
            ap_depth: defaults.ap_depth,
        };
        let is_ap = if family == "AP" {
            true
        } else if let Some(k) = family.strip_prefix("P@") {
            if k != "k" {
                config.cutoff = k.parse().ok().filter(|&k| k >= 1).ok_or_else(unknown)?;
            }
            false
        } else {
            return Err(unknown());
        };
        let kind = match (is_ap, suffix) {
            (false, None) => MetricKind::Precision,
            (true, None) => MetricKind::AveragePrecision,
            (false, Some("rareness")) => MetricKind::PrecisionRareness,
            (true, Some("rareness")) => MetricKind::AveragePrecisionRareness,
            (false, Some("mixture")) => MetricKind::PrecisionMixture,
            _ => return Err(unknown()),
        };
        if !kind.uses_rarity() {
            config.alpha = 0.0;
        }
        for param in params.into_iter().flat_map(|p| p.split(',')).filter(|p| !p.is_empty()) {
            let (key, value) = param.split_once('=').ok_or_else(unknown)?;
            let bad = || Error::Config(format!("bad value `{value}` for `{key}` in `{name}`"));
            match key.trim() {
                "alpha" if kind.uses_rarity() => {
                    config.alpha = value.trim().parse().map_err(|_| bad())?
                }
                "rarity" if kind.uses_rarity() => config.rarity = value.trim().parse()?,
                "depth" if kind.is_ap_family() => match value.trim() {
                    "full" => config.ap_depth = ApDepth::Full,
                    "cutoff" => config.ap_depth = ApDepth::Cutoff,
                    v => {
                        config.ap_depth = ApDepth::Cutoff;
                        config.cutoff = v.parse().ok().filter(|&k| k >= 1).ok_or_else(bad)?;
                    }
                },
                _ => return Err(unknown()),
            }
        }
        Metric::new(kind, config)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        let mut params = Vec::new();
        if self.kind.uses_rarity() {
            params.push(format!("alpha={}", c.alpha));
            params.push(format!("rarity={}", c.rarity));
        }
        if self.kind.is_ap_family() {
            match c.ap_depth {
                ApDepth::Full => params.push("depth=full".into()),
                ApDepth::Cutoff if c.cutoff != 100 => params.push(format!("depth={}", c.cutoff)),
                ApDepth::Cutoff => {}
            }
        }
        match self.kind {
            MetricKind::Precision => write!(f, "P@{}", c.cutoff)?,
            MetricKind::PrecisionRareness => write!(f, "P@{}_rareness", c.cutoff)?,
            MetricKind::PrecisionMixture => write!(f, "P@{}_mixture", c.cutoff)?,
            MetricKind::AveragePrecision => f.write_str("AP")?,
            MetricKind::AveragePrecisionRareness => f.write_str("AP_rareness")?,
        }
        if !params.is_empty() {
            write!(f, "({})", params.join(","))?;
        }
        Ok(())
    }
}

/// Per-rank input to the rarity-weighted kernels: `None` for a non-relevant
/// document, `Some(r)` for a relevant one with rarity `r`.
fn gains<'a>(
    ranking: &'a [RankedDoc],
    judgments: &'a TopicJudgments<'_>,
    rarity: &'a TopicRarity<'_>,
    variant: RarityVariant,
) -> impl Iterator<Item = Option<f64>> + 'a {
    ranking.iter().map(move |d| {
        judgments
            .is_relevant(&d.doc_id)
            .then(|| rarity.rarity_of_retrieved(&d.doc_id, variant))
    })
}

fn relevance<'a>(
    ranking: &'a [RankedDoc],
    judgments: &'a TopicJudgments<'_>,
) -> impl Iterator<Item = bool> + 'a {
    ranking.iter().map(move |d| judgments.is_relevant(&d.doc_id))
}

/// P@k = (1/k) Σ Rel(d_i).
pub fn precision_at_k(ranking: &[RankedDoc], judgments: &TopicJudgments<'_>, k: usize) -> f64 {
    kernels::precision(relevance(ranking, judgments), k)
}

/// Rareness-weighted precision: (1/k) Σ Rel(d_i) (1 + α R(d_i)).
pub fn p_at_k_rareness(
    ranking: &[RankedDoc],
    judgments: &TopicJudgments<'_>,
    rarity: &TopicRarity<'_>,
    config: &MetricConfig,
) -> f64 {
    kernels::rareness_precision(
        gains(ranking, judgments, rarity, config.rarity),
        config.cutoff,
        config.alpha,
    )
}

/// Mixture precision: (1/k) Σ [(1 - α) Rel(d_i) + α Rel(d_i) R(d_i)], bounded in [0, 1].
pub fn p_at_k_mixture(
    ranking: &[RankedDoc],
    judgments: &TopicJudgments<'_>,
    rarity: &TopicRarity<'_>,
    config: &MetricConfig,
) -> Result<f64> {
    Metric::new(MetricKind::PrecisionMixture, *config)?;
    Ok(kernels::mixture(
        gains(ranking, judgments, rarity, config.rarity),
        config.cutoff,
        config.alpha,
    ))
}

/// AP = (1/N_R) Σ_{i<=k} Rel(d_i) P@i; `None` when `n_relevant` is zero.
pub fn average_precision(
    ranking: &[RankedDoc],
    judgments: &TopicJudgments<'_>,
    k: usize,
    n_relevant: usize,
) -> Option<f64> {
    kernels::average_precision(relevance(ranking, judgments), k, n_relevant)
}

/// Rareness-weighted AP: (1/N_R) Σ_{i<=k} Rel(d_i) P@i_rareness.
pub fn ap_rareness(
    ranking: &[RankedDoc],
    judgments: &TopicJudgments<'_>,
    rarity: &TopicRarity<'_>,
    config: &MetricConfig,
    n_relevant: usize,
) -> Option<f64> {
    let k = match config.ap_depth {
        ApDepth::Cutoff => config.cutoff,
        ApDepth::Full => ranking.len(),
    };
    kernels::ap_rareness(
        gains(ranking, judgments, rarity, config.rarity),
        k,
        config.alpha,
        n_relevant,
    )
}

/// The arithmetic shared by every evaluation path. Each kernel walks ranks in
/// ascending order and stops at `k`.
pub(crate) mod kernels {
    pub fn precision(rels: impl Iterator<Item = bool>, k: usize) -> f64 {
        let mut sum = 0.0;
        for rel in rels.take(k) {
            if rel {
                sum += 1.0;
            }
        }
        sum / k as f64
    }

    pub fn rareness_precision(gains: impl Iterator<Item = Option<f64>>, k: usize, alpha: f64) -> f64 {
        let mut sum = 0.0;
        for r in gains.take(k).flatten() {
            sum += 1.0 + alpha * r;
        }
        sum / k as f64
    }

    pub fn mixture(gains: impl Iterator<Item = Option<f64>>, k: usize, alpha: f64) -> f64 {
        let mut sum = 0.0;
        for r in gains.take(k).flatten() {
            sum += (1.0 - alpha) + alpha * r;
        }
        sum / k as f64
    }

    pub fn average_precision(
        rels: impl Iterator<Item = bool>,
        k: usize,
        n_relevant: usize,
    ) -> Option<f64> {
        if n_relevant == 0 {
            return None;
        }
        let mut hits = 0.0;
        let mut sum = 0.0;
        for (i, rel) in rels.take(k).enumerate() {
            if rel {
                hits += 1.0;
                sum += hits / (i + 1) as f64;
            }
        }
        Some(sum / n_relevant as f64)
    }

    /// The inner precision at each relevant rank is kept as a running sum,
    /// so the whole metric is linear in `k`.
    pub fn ap_rareness(
        gains: impl Iterator<Item = Option<f64>>,
        k: usize,
        alpha: f64,
        n_relevant: usize,
    ) -> Option<f64> {
        if n_relevant == 0 {
            return None;
        }
        let mut running = 0.0;
        let mut sum = 0.0;
        for (i, gain) in gains.take(k).enumerate() {
            if let Some(r) = gain {
                running += 1.0 + alpha * r;
                sum += running / (i + 1) as f64;
            }
        }
        Some(sum / n_relevant as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rarity::{tests::toy4, CountDepth, RarityIndex};
    use proptest::prelude::*;

    fn cfg(cutoff: usize, alpha: f64, rarity: RarityVariant) -> MetricConfig {
        MetricConfig {
            cutoff,
            alpha,
            rarity,
            ap_depth: ApDepth::Cutoff,
        }
    }

    #[test]
    fn toy4_system_b() {
        let c = toy4();
        let idx = RarityIndex::build(&c, CountDepth::Unlimited);
        let b = c.run("B").unwrap().ranking("t1");
        let j = c.qrels().topic("t1");
        let r = idx.topic("t1");

        assert!((precision_at_k(b, &j, 3) - 2.0 / 3.0).abs() < 1e-15);
        let p = p_at_k_rareness(b, &j, &r, &cfg(3, 1.0, RarityVariant::Standard));
        assert!((p - 2.75 / 3.0).abs() < 1e-15);
        assert!((average_precision(b, &j, 3, 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let ap = ap_rareness(b, &j, &r, &cfg(3, 1.0, RarityVariant::Standard), 3).unwrap();
        assert!((ap - 2.375 / 3.0).abs() < 1e-15);
        let mix = p_at_k_mixture(b, &j, &r, &cfg(3, 0.5, RarityVariant::Revised)).unwrap();
        assert!((mix - 0.5).abs() < 1e-15);
    }

    #[test]
    fn edge_cases() {
        let c = toy4();
        let idx = RarityIndex::build(&c, CountDepth::Unlimited);
        let j = c.qrels().topic("t1");
        let r = idx.topic("t1");
        assert_eq!(precision_at_k(&[], &j, 5), 0.0);
        assert_eq!(average_precision(&[], &j, 5, 3), Some(0.0));
        assert_eq!(average_precision(&[], &j, 5, 0), None);
        assert_eq!(
            ap_rareness(&[], &j, &r, &cfg(5, 1.0, RarityVariant::Standard), 0),
            None
        );
        let only = [RankedDoc::new("d1", 1.0, 1)];
        assert_eq!(average_precision(&only, &j, 10, 1), Some(1.0));
        let all_rel = [
            RankedDoc::new("d1", 3.0, 1),
            RankedDoc::new("d2", 2.0, 2),
            RankedDoc::new("d3", 1.0, 3),
        ];
        assert_eq!(precision_at_k(&all_rel, &j, 3), 1.0);
        assert!(p_at_k_mixture(&all_rel, &j, &r, &cfg(3, 1.5, RarityVariant::Revised)).is_err());
    }

    #[test]
    fn names_round_trip_through_display() {
        let d = MetricDefaults::default();
        for name in [
            "P@100",
            "AP",
            "P@10_rareness(alpha=0.5,rarity=eq2)",
            "AP_rareness(alpha=1,rarity=revised)",
            "P@100_mixture(alpha=0.25,rarity=revised)",
            "AP(depth=full)",
            "AP_rareness(alpha=0,rarity=eq2,depth=20)",
        ] {
            let m = Metric::parse(name, &d).unwrap();
            assert_eq!(m.to_string(), name);
            assert_eq!(Metric::parse(&m.to_string(), &d).unwrap(), m);
        }
        let m = Metric::parse("P@k_rareness", &MetricDefaults { cutoff: 7, alpha: 0.25, ..d })
            .unwrap();
        assert_eq!(m.to_string(), "P@7_rareness(alpha=0.25,rarity=eq2)");
        for bad in ["nDCG", "P@0", "P@x", "AP_mixture", "P@10_rareness(beta=1)", "AP(alpha=1)"] {
            assert!(Metric::parse(bad, &d).is_err(), "{bad}");
        }
        assert!(matches!(
            Metric::parse("nDCG", &d),
            Err(Error::UnknownMetric { .. })
        ));
        assert!(Metric::parse("P@10_mixture(alpha=2)", &d).is_err());
        assert!(Metric::parse("P@10_rareness(alpha=-1)", &d).is_err());
        assert!(Metric::parse("P@10_rareness(alpha=2)", &d).is_ok());
    }

    fn arb_gains() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::of(0.0f64..1.0), 0..40)
    }

    proptest! {
        #[test]
        fn alpha_zero_reverts_bitwise(gains in arb_gains(), k in 1usize..50, nr in 0usize..30) {
            let rels = gains.iter().map(Option::is_some);
            prop_assert_eq!(
                kernels::precision(rels.clone(), k).to_bits(),
                kernels::rareness_precision(gains.iter().copied(), k, 0.0).to_bits()
            );
            prop_assert_eq!(
                kernels::precision(rels.clone(), k).to_bits(),
                kernels::mixture(gains.iter().copied(), k, 0.0).to_bits()
            );
            prop_assert_eq!(
                kernels::average_precision(rels, k, nr).map(f64::to_bits),
                kernels::ap_rareness(gains.iter().copied(), k, 0.0, nr).map(f64::to_bits)
            );
        }

        #[test]
        fn monotone_in_alpha(gains in arb_gains(), k in 1usize..50, a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let nr = gains.iter().filter(|g| g.is_some()).count().max(1);
            prop_assert!(
                kernels::rareness_precision(gains.iter().copied(), k, lo)
                    <= kernels::rareness_precision(gains.iter().copied(), k, hi)
            );
            prop_assert!(
                kernels::ap_rareness(gains.iter().copied(), k, lo, nr)
                    <= kernels::ap_rareness(gains.iter().copied(), k, hi, nr)
            );
        }

        #[test]
        fn mixture_is_bounded(gains in arb_gains(), k in 1usize..50, alpha in 0.0f64..=1.0) {
            let v = kernels::mixture(gains.iter().copied(), k, alpha);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }
}
