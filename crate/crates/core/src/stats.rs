//! Goodness-of-fit statistics used by the Monte Carlo checks.

use std::collections::BTreeMap;

use crate::special::{chi_square_sf, ks_p_value};

/// One-sample Kolmogorov–Smirnov statistic of `samples` against `cdf`. Sorts in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("samples are finite"));
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// KS test of `samples` against `cdf` with the asymptotic p-value.
pub fn ks_test(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> KsOutcome {
    let statistic = ks_statistic(samples, cdf);
    KsOutcome { statistic, p_value: ks_p_value(statistic, samples.len()), n: samples.len() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Chi-square test that two samples of counts come from the same distribution.
///
/// Values are binned individually; the upper tail is pooled until every bin's
/// expected frequency in both samples is at least five.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquareOutcome {
    let tally = |xs: &[u64]| {
        let mut m = BTreeMap::new();
        for &x in xs {
            *m.entry(x).or_insert(0u64) += 1;
        }
        m
    };
    let (ta, tb) = (tally(a), tally(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let max = ta.keys().chain(tb.keys()).copied().max().unwrap_or(0);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pending = (0.0, 0.0);
    for v in 0..=max {
        pending.0 += *ta.get(&v).unwrap_or(&0) as f64;
        pending.1 += *tb.get(&v).unwrap_or(&0) as f64;
        let pooled = pending.0 + pending.1;
        let min_expected = pooled * na.min(nb) / (na + nb);
        if min_expected >= 5.0 {
            bins.push(pending);
            pending = (0.0, 0.0);
        }
    }
    if pending.0 + pending.1 > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += pending.0;
                last.1 += pending.1;
            }
            None => bins.push(pending),
        }
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(oa, ob)| {
            let pooled = oa + ob;
            let ea = pooled * na / (na + nb);
            let eb = pooled * nb / (na + nb);
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum();
    let df = bins.len().saturating_sub(1);
    let p_value = if df == 0 { 1.0 } else { chi_square_sf(statistic, df) };
    ChiSquareOutcome { statistic, df, p_value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn ks_on_uniforms() {
        let mut s = Stream::new(4, 0, 2);
        let mut xs: Vec<f64> = (0..50_000).map(|_| s.open01()).collect();
        let out = ks_test(&mut xs, |x| x);
        assert!(out.p_value > 0.01, "{out:?}");
        let mut skewed: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(ks_test(&mut skewed, |x| x).p_value < 1e-10);
    }

    #[test]
    fn ks_statistic_small_case() {
        let mut xs = vec![0.5];
        assert!((ks_statistic(&mut xs, |x| x) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chi_square_identical_and_shifted() {
        let a: Vec<u64> = (0..10_000).map(|i| i % 5).collect();
        let out = chi_square_two_sample(&a, &a);
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.df, 4);
        let b: Vec<u64> = (0..10_000).map(|i| (i % 5) + u64::from(i % 3 == 0)).collect();
        assert!(chi_square_two_sample(&a, &b).p_value < 1e-6);
    }
}
