//! Paired comparison statistics: the exact sign-flip permutation test, the
//! Wilcoxon signed-rank test, weighted Liptak combination of p-values, paired
//! standardized mean differences, and a meta-analysis over datasets.
//!
//! Every test here is one-sided for "the differences are positive". Callers
//! comparing pipeline A with pipeline B pass `b − a`, so small p-values and
//! positive effects favour B.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

mod meta;

pub use meta::{meta_compare, DatasetEffect, MetaReport, ScoreCell, REPORT_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The exact test was asked for 20 or more pairs; use the signed-rank
    /// test instead.
    #[error("{n} pairs: the exact permutation test covers fewer than {limit}, use the signed-rank test")]
    RoutedElsewhere { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, StatsError>;

fn invalid(msg: impl Into<String>) -> StatsError {
    StatsError::InvalidInput(msg.into())
}

/// Number of pairs from which the signed-rank test replaces the exact test.
pub const EXACT_TEST_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ExactPermutation,
    WilcoxonSignedRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub method: TestMethod,
    /// One-sided p-value for positive differences.
    pub p_value: f64,
    /// Mean difference for the permutation test, `W⁺` for the signed-rank test.
    pub statistic: f64,
    /// Set when every difference is zero.
    pub degenerate: bool,
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    standard_normal().pdf(x)
}

fn check_finite(diffs: &[f64]) -> Result<()> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(invalid("differences must be finite"));
    }
    Ok(())
}

/// Exact one-sided sign-flip permutation test on the mean difference.
///
/// All `2ⁿ` sign assignments are enumerated; p is the fraction whose mean is
/// at least the observed one (the observed assignment included). Sums are
/// compared with a tolerance of `1e-12 · Σ|dᵢ|` so rounding never splits
/// assignments with equal exact sums.
pub fn exact_permutation_test(diffs: &[f64]) -> Result<TestOutcome> {
    let n = diffs.len();
    if n < 2 {
        return Err(invalid(format!("at least 2 pairs are needed, got {n}")));
    }
    if n >= EXACT_TEST_LIMIT {
        return Err(StatsError::RoutedElsewhere {
            n,
            limit: EXACT_TEST_LIMIT,
        });
    }
    check_finite(diffs)?;
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let total: f64 = magnitudes.iter().sum();
    let observed: f64 = diffs.iter().sum();
    let slack = 1e-12 * total;
    let mut count: u64 = 0;
    for mask in 0u64..(1u64 << n) {
        let mut s = 0.0;
        for (i, &m) in magnitudes.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s -= m;
            } else {
                s += m;
            }
        }
        if s >= observed - slack {
            count += 1;
        }
    }
    Ok(TestOutcome {
        method: TestMethod::ExactPermutation,
        p_value: count as f64 / (1u64 << n) as f64,
        statistic: observed / n as f64,
        degenerate: total == 0.0,
    })
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// One-sided Wilcoxon signed-rank test by the normal approximation.
///
/// Zero differences are dropped, the rest ranked by magnitude with average
/// ranks for ties. With `m` remaining pairs and tie groups of sizes `t`,
///
/// ```text
/// μ = m(m+1)/4,   σ² = m(m+1)(2m+1)/24 − Σ(t³ − t)/48,
/// p = 1 − Φ((W⁺ − μ − 0.5) / σ).
/// ```
///
/// Inputs with fewer than 20 pairs are routed to the exact test. If every
/// difference is zero the outcome is `p = 1` flagged degenerate.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<TestOutcome> {
    if diffs.len() < EXACT_TEST_LIMIT {
        return Err(invalid(format!(
            "the signed-rank test is used from {EXACT_TEST_LIMIT} pairs, got {}",
            diffs.len()
        )));
    }
    check_finite(diffs)?;
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Ok(TestOutcome {
            method: TestMethod::WilcoxonSignedRank,
            p_value: 1.0,
            statistic: 0.0,
            degenerate: true,
        });
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let m = nonzero.len() as f64;
    let mu = m * (m + 1.0) / 4.0;
    let mut sorted = magnitudes.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - tie_term / 48.0;
    let p = if var > 0.0 {
        1.0 - normal_cdf((w_plus - mu - 0.5) / var.sqrt())
    } else {
        1.0
    };
    Ok(TestOutcome {
        method: TestMethod::WilcoxonSignedRank,
        p_value: p,
        statistic: w_plus,
        degenerate: false,
    })
}

/// The exact test below 20 pairs, the signed-rank test from 20.
pub fn paired_test(diffs: &[f64]) -> Result<TestOutcome> {
    if diffs.len() < EXACT_TEST_LIMIT {
        exact_permutation_test(diffs)
    } else {
        wilcoxon_signed_rank(diffs)
    }
}

/// p-values are clamped to this distance from 0 and 1 before the normal
/// quantile is taken.
pub const LIPTAK_CLAMP: f64 = 1e-15;

/// Weighted Liptak (inverse-normal) combination:
/// `zᵢ = Φ⁻¹(1 − pᵢ)`, `T = Σ wᵢ zᵢ / √(Σ wᵢ²)`, `p = 1 − Φ(T)`.
pub fn liptak_combine(p_values: &[f64], weights: &[f64]) -> Result<f64> {
    if p_values.is_empty() {
        return Err(invalid("no p-values to combine"));
    }
    if p_values.len() != weights.len() {
        return Err(invalid("p-values and weights differ in length"));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("p-values must lie in [0, 1]"));
    }
    if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(invalid("weights must be positive"));
    }
    if p_values.len() == 1 {
        return Ok(p_values[0]);
    }
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let t: f64 = p_values
        .iter()
        .zip(weights)
        .map(|(&p, &w)| w * normal_quantile(1.0 - p.clamp(LIPTAK_CLAMP, 1.0 - LIPTAK_CLAMP)))
        .sum::<f64>()
        / norm;
    Ok(1.0 - normal_cdf(t))
}

/// Paired standardized mean difference with a large-sample 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Smd {
    /// `mean(b − a) / sd(b − a)`; 0 when the differences have no spread.
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The differences have zero variance, so the ratio is undefined.
    pub degenerate: bool,
}

/// Paired Cohen's d of `b` over `a`, with the sample (n − 1) standard
/// deviation and interval `± 1.96/√n`.
pub fn smd(a: &[f64], b: &[f64]) -> Result<Smd> {
    if a.len() != b.len() {
        return Err(invalid("paired samples differ in length"));
    }
    let n = a.len();
    if n < 2 {
        return Err(invalid(format!("at least 2 pairs are needed, got {n}")));
    }
    let d: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
    check_finite(&d)?;
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let degenerate = !(sd > 1e-12 * scale);
    let value = if degenerate { 0.0 } else { mean / sd };
    let half = 1.96 / nf.sqrt();
    Ok(Smd {
        value,
        ci_low: value - half,
        ci_high: value + half,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_hand_cases() {
        assert_eq!(exact_permutation_test(&[1.0, 2.0, 3.0]).unwrap().p_value, 0.125);
        let zero = exact_permutation_test(&[0.0, 0.0]).unwrap();
        assert_eq!(zero.p_value, 1.0);
        assert!(zero.degenerate);
        assert_eq!(exact_permutation_test(&[-1.0, -2.0, -3.0]).unwrap().p_value, 1.0);
        // signed sums over (1, 2, 3): 6, 0, 2, −4, 4, −2, 0, −6; five reach the observed 0
        assert_eq!(exact_permutation_test(&[1.0, 2.0, -3.0]).unwrap().p_value, 5.0 / 8.0);
    }

    #[test]
    fn permutation_routes_large_inputs() {
        let d = vec![1.0; 20];
        assert_eq!(
            exact_permutation_test(&d),
            Err(StatsError::RoutedElsewhere { n: 20, limit: 20 })
        );
        assert!(exact_permutation_test(&[1.0]).is_err());
    }

    #[test]
    fn rounding_does_not_split_ties() {
        // 0.1 + 0.2 and 0.3 are equal sums in exact arithmetic
        let p = exact_permutation_test(&[0.1, 0.2, -0.3]).unwrap().p_value;
        let q = exact_permutation_test(&[1.0, 2.0, -3.0]).unwrap().p_value;
        assert_eq!(p, q);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn wilcoxon_all_positive() {
        let d: Vec<f64> = (1..=20).map(f64::from).collect();
        let t = wilcoxon_signed_rank(&d).unwrap();
        assert_eq!(t.statistic, 210.0);
        let expect = 1.0 - normal_cdf((210.0 - 105.0 - 0.5) / 717.5f64.sqrt());
        assert!((t.p_value - expect).abs() < 1e-15);
        assert!(t.p_value < 1e-4);
    }

    #[test]
    fn wilcoxon_symmetric_is_about_half() {
        let d: Vec<f64> = (1..=10).flat_map(|k| [k as f64, -(k as f64)]).collect();
        let t = wilcoxon_signed_rank(&d).unwrap();
        let sigma = {
            // ten tie pairs
            let m = 20.0f64;
            (m * (m + 1.0) * (2.0 * m + 1.0) / 24.0 - 10.0 * 6.0 / 48.0).sqrt()
        };
        assert!((t.p_value - (1.0 - normal_cdf(-0.5 / sigma))).abs() < 1e-15);
        assert!((t.p_value - 0.5).abs() < 0.02);
    }

    #[test]
    fn wilcoxon_all_zero_is_degenerate() {
        let t = wilcoxon_signed_rank(&[0.0; 25]).unwrap();
        assert_eq!(t.p_value, 1.0);
        assert!(t.degenerate);
    }

    #[test]
    fn liptak_cases() {
        assert_eq!(liptak_combine(&[0.03], &[7.0]).unwrap(), 0.03);
        assert!((liptak_combine(&[0.5, 0.5], &[1.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
        let p = liptak_combine(&[0.05, 0.05], &[1.0, 1.0]).unwrap();
        assert!((p - 0.0100).abs() < 1e-4);
        assert!(liptak_combine(&[], &[]).is_err());
        assert!(liptak_combine(&[0.5], &[0.0]).is_err());
    }

    #[test]
    fn smd_hand_case() {
        let a = [0.5, 0.5, 0.5, 0.5];
        let b = [0.7, 0.5, 0.6, 0.6];
        let s = smd(&a, &b).unwrap();
        // mean 0.1, sample sd √(0.02/3) = 0.0816497
        assert!((s.value - 0.1 / (0.02f64 / 3.0).sqrt()).abs() < 1e-9);
        assert!((s.value - 1.2247).abs() < 1e-4);
        assert!((s.ci_high - s.ci_low - 2.0 * 1.96 / 2.0).abs() < 1e-12);
        assert!(!s.degenerate);
    }

    #[test]
    fn smd_degenerate_cases() {
        let a = [0.6, 0.7, 0.8, 0.9];
        let same = smd(&a, &a).unwrap();
        assert_eq!(same.value, 0.0);
        assert!(same.degenerate);
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.1).collect();
        let s = smd(&a, &shifted).unwrap();
        assert!(s.degenerate);
        assert!(s.value.is_finite());
    }
}
