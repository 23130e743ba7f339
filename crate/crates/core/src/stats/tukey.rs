//! Studentized range distribution and Tukey's HSD over a system × topic matrix.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI, SQRT_2};
use std::sync::Mutex;

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::quadrature::integrate_split;
use crate::campaign::ScoreMatrix;
use crate::error::{Error, Result};

/// Residual mean squares below this are treated as zero.
const ZERO_RESIDUAL: f64 = 1e-12;

/// Above this many degrees of freedom the variance estimate is treated as exact.
const DF_INFINITE: f64 = 1e7;

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// P(range of `k` standard normals <= w).
fn range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let km1 = (k - 1) as i32;
    let inner = |z: f64| {
        let d = norm_cdf(z) - norm_cdf(z - w);
        norm_pdf(z) * d.max(0.0).powi(km1)
    };
    (k as f64 * integrate_split(inner, -8.5, 8.5 + w.min(8.5), 8, 1e-12)).min(1.0)
}

/// log density of `s = sqrt(X / df)` for `X ~ chi-square(df)`.
fn ln_scaled_chi_pdf(s: f64, df: f64) -> f64 {
    let x = df / 2.0;
    if x > 10.0 {
        // Stirling series for x ln x - ln Gamma(x), grouped to avoid cancellation.
        LN_2 + 0.5 * x.ln() - 0.5 * (2.0 * PI).ln() - 1.0 / (12.0 * x)
            + 1.0 / (360.0 * x.powi(3))
            + x * (1.0 - s * s + 2.0 * s.ln())
            - s.ln()
    } else {
        LN_2 + x * x.ln() - ln_gamma(x) + (df - 1.0) * s.ln() - x * s * s
    }
}

/// CDF of the studentized range for `k` groups and `df` error degrees of freedom.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> f64 {
    if !(q > 0.0) || k < 2 {
        return 0.0;
    }
    if df >= DF_INFINITE {
        return range_cdf(q, k);
    }
    let sigma = 1.0 / (2.0 * df).sqrt();
    let lo = (1.0 - 14.0 * sigma).max(0.0);
    let hi = 1.0 + 14.0 * sigma;
    let outer = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        ln_scaled_chi_pdf(s, df).exp() * range_cdf(q * s, k)
    };
    integrate_split(outer, lo, hi, 16, 1e-9).clamp(0.0, 1.0)
}

static QUANTILE_CACHE: Mutex<Option<HashMap<(u64, usize, u64), f64>>> = Mutex::new(None);

/// Inverse of [`studentized_range_cdf`] in `q`, found by Brent's method to
/// well under 1e-4 absolute error. Results are memoised per process.
pub fn studentized_range_quantile(p: f64, k: usize, df: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Config(format!("probability must be in (0, 1), got {p}")));
    }
    if k < 2 {
        return Err(Error::Config(format!("studentized range needs k >= 2, got {k}")));
    }
    if !(df > 0.0) {
        return Err(Error::Config(format!("degrees of freedom must be > 0, got {df}")));
    }
    let key = (p.to_bits(), k, df.to_bits());
    if let Some(q) = QUANTILE_CACHE
        .lock()
        .unwrap()
        .as_ref()
        .and_then(|c| c.get(&key))
    {
        return Ok(*q);
    }

    let f = |q: f64| studentized_range_cdf(q, k, df) - p;
    let (mut a, mut fa) = (0.0, -p);
    let mut b = 2.0;
    let mut fb = f(b);
    while fb < 0.0 {
        a = b;
        fa = fb;
        b *= 2.0;
        if b > 1e6 {
            return Err(Error::Undefined(format!(
                "studentized range quantile diverged for p={p}, k={k}, df={df}"
            )));
        }
        fb = f(b);
    }
    let q = brent(f, a, fa, b, fb, 1e-8);
    QUANTILE_CACHE
        .lock()
        .unwrap()
        .get_or_insert_with(HashMap::new)
        .insert(key, q);
    Ok(q)
}

/// Brent's root finder on a bracket with `fa < 0 <= fb`.
fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, tol: f64) -> f64 {
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiscriminativePower {
    pub level: f64,
    pub significant_pairs: usize,
    pub total_pairs: usize,
    /// Honestly significant difference between two system means.
    pub critical_difference: f64,
    /// Studentized range quantile; `None` on the zero-residual path.
    pub q_critical: Option<f64>,
    pub residual_mean_square: f64,
    pub df: f64,
}

/// Counts system pairs that Tukey's HSD separates at confidence `level`
/// (e.g. 0.95). The error term comes from an additive two-way model with
/// systems as treatments and topics as blocks.
pub fn discriminative_power(matrix: &ScoreMatrix, level: f64) -> Result<DiscriminativePower> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("significance level must be in (0, 1), got {level}")));
    }
    let topics = matrix.active_topics();
    let n_sys = matrix.num_systems();
    let n_top = topics.len();
    if n_sys < 2 || n_top < 2 {
        return Err(Error::Undefined(format!(
            "Tukey HSD needs at least 2 systems and 2 topics, got {n_sys} and {n_top}"
        )));
    }
    let df = ((n_sys - 1) * (n_top - 1)) as f64;

    let sys_means = matrix.means_over(&topics);
    let grand = sys_means.iter().sum::<f64>() / n_sys as f64;
    let topic_means: Vec<f64> = topics
        .iter()
        .map(|&t| (0..n_sys).map(|s| matrix.get(s, t)).sum::<f64>() / n_sys as f64)
        .collect();
    let mut ss_residual = 0.0;
    for (s, sm) in sys_means.iter().enumerate() {
        for (j, &t) in topics.iter().enumerate() {
            let r = matrix.get(s, t) - sm - topic_means[j] + grand;
            ss_residual += r * r;
        }
    }
    let mse = ss_residual / df;

    let (q_critical, critical_difference) = if mse < ZERO_RESIDUAL {
        (None, ZERO_RESIDUAL)
    } else {
        let q = studentized_range_quantile(level, n_sys, df)?;
        (Some(q), q * (mse / n_top as f64).sqrt())
    };

    let mut significant = 0;
    for a in 0..n_sys {
        for b in a + 1..n_sys {
            if (sys_means[a] - sys_means[b]).abs() > critical_difference {
                significant += 1;
            }
        }
    }
    Ok(DiscriminativePower {
        level,
        significant_pairs: significant,
        total_pairs: n_sys * (n_sys - 1) / 2,
        critical_difference,
        q_critical,
        residual_mean_square: mse,
        df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{Metric, MetricConfig, MetricKind};

    fn matrix(rows: &[&[f64]]) -> ScoreMatrix {
        let topics = rows[0].len();
        ScoreMatrix::new(
            Metric::new(MetricKind::Precision, MetricConfig::default()).unwrap(),
            (0..rows.len()).map(|i| format!("s{i}")).collect(),
            (0..topics).map(|i| format!("t{i}")).collect(),
            rows.concat(),
            vec![false; topics],
        )
        .unwrap()
    }

    #[test]
    fn range_of_two_normals() {
        // Range of two standard normals is |Z1 - Z2| ~ sqrt(2)|N(0,1)|.
        for w in [0.3, 1.0, 2.5, 4.0] {
            let exact = 2.0 * norm_cdf(w / SQRT_2) - 1.0;
            assert!((range_cdf(w, 2) - exact).abs() < 1e-10, "w={w}");
        }
    }

    #[test]
    fn cdf_matches_reference_values() {
        // Reference values from an independent implementation (scipy).
        assert!((studentized_range_cdf(3.5, 3, 10.0) - 0.922_896_689_161_589_6).abs() < 1e-6);
        assert!((studentized_range_cdf(2.0, 4, 5.0) - 0.457_516_272_782_666_2).abs() < 1e-6);
        assert!((studentized_range_cdf(5.0, 6, 60.0) - 0.990_179_631_937_547_2).abs() < 1e-6);
        assert_eq!(studentized_range_cdf(0.0, 3, 10.0), 0.0);
    }

    #[test]
    fn quantiles_match_tables() {
        let cases = [
            (0.95, 3, 10.0, 3.877),
            (0.99, 5, 20.0, 5.294),
            (0.95, 2, 4.0, 3.926),
            (0.95, 10, 30.0, 4.824),
            (0.99, 3, 10.0, 5.270),
        ];
        for (p, k, df, expected) in cases {
            let q = studentized_range_quantile(p, k, df).unwrap();
            assert!((q - expected).abs() < 1e-3, "q({p},{k},{df}) = {q}, expected {expected}");
        }
        assert!(studentized_range_quantile(1.0, 3, 10.0).is_err());
        assert!(studentized_range_quantile(0.95, 1, 10.0).is_err());
    }

    #[test]
    fn large_df_is_stable() {
        let q = studentized_range_quantile(0.95, 64, 2772.0).unwrap();
        assert!((q - 5.813_064_844).abs() < 1e-3, "{q}");
        let near = studentized_range_quantile(0.95, 3, 1e6).unwrap();
        let inf = studentized_range_quantile(0.95, 3, 1e8).unwrap();
        assert!((near - inf).abs() < 1e-3);
    }

    #[test]
    fn identical_systems_are_indistinguishable() {
        let m = matrix(&[&[0.1, 0.5, 0.3], &[0.1, 0.5, 0.3], &[0.1, 0.5, 0.3]]);
        let dp = discriminative_power(&m, 0.95).unwrap();
        assert_eq!(dp.significant_pairs, 0);
        assert_eq!(dp.total_pairs, 3);
    }

    #[test]
    fn zero_residual_separates_unequal_means() {
        let m = matrix(&[&[1.0; 5], &[0.0; 5]]);
        let dp = discriminative_power(&m, 0.99).unwrap();
        assert_eq!(dp.significant_pairs, 1);
        assert_eq!(dp.q_critical, None);
    }

    #[test]
    fn degenerate_shapes_are_errors() {
        assert!(discriminative_power(&matrix(&[&[1.0, 2.0]]), 0.95).is_err());
        assert!(discriminative_power(&matrix(&[&[1.0], &[2.0]]), 0.95).is_err());
        assert!(discriminative_power(&matrix(&[&[1.0, 2.0], &[0.0, 1.0]]), 1.5).is_err());
    }

    #[test]
    fn hsd_by_hand() {
        // Three systems, four topics with an additive structure plus noise.
        let m = matrix(&[
            &[0.50, 0.60, 0.40, 0.55],
            &[0.30, 0.45, 0.20, 0.30],
            &[0.48, 0.62, 0.35, 0.57],
        ]);
        let dp = discriminative_power(&m, 0.95).unwrap();
        assert_eq!(dp.df, 6.0);
        // Residual mean square computed by hand from the two-way decomposition.
        let means = [0.5125, 0.3125, 0.505];
        let tmeans = [0.426_666_666_666_666_7, 0.556_666_666_666_666_7, 0.316_666_666_666_666_7, 0.473_333_333_333_333_3];
        let grand = (0.5125 + 0.3125 + 0.505) / 3.0;
        let rows = [[0.50, 0.60, 0.40, 0.55], [0.30, 0.45, 0.20, 0.30], [0.48, 0.62, 0.35, 0.57]];
        let mut ss = 0.0;
        for s in 0..3 {
            for t in 0..4 {
                let r: f64 = rows[s][t] - means[s] - tmeans[t] + grand;
                ss += r * r;
            }
        }
        assert!((dp.residual_mean_square - ss / 6.0).abs() < 1e-12);
        let hsd = dp.q_critical.unwrap() * (ss / 6.0 / 4.0).sqrt();
        assert!((dp.critical_difference - hsd).abs() < 1e-12);
        // 0 vs 1 and 2 vs 1 are far apart; 0 vs 2 are not.
        assert_eq!(dp.significant_pairs, 2);
    }
}
