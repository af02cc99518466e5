#![allow(dead_code)]

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use tiermatch::{MarketConfig, TierConfig};

pub fn tiers(p: &[f64], s: &[f64]) -> TierConfig {
    TierConfig::new(p.to_vec(), s.to_vec()).unwrap()
}

/// Men δ = (1/4, 3/4), β = (3, 1); women ε = (1/16, 5/16, 5/8), α = (3, 2, 1).
pub fn convergence_market(n: usize) -> MarketConfig {
    MarketConfig::balanced(
        n,
        tiers(&[0.25, 0.75], &[3.0, 1.0]),
        tiers(&[1.0 / 16.0, 5.0 / 16.0, 5.0 / 8.0], &[3.0, 2.0, 1.0]),
    )
    .unwrap()
}

/// δ = ε = (1/2, 1/2), β = (3, 1), α = (5, 1).
pub fn two_tier_market(n: usize) -> MarketConfig {
    MarketConfig::balanced(n, tiers(&[0.5, 0.5], &[3.0, 1.0]), tiers(&[0.5, 0.5], &[5.0, 1.0])).unwrap()
}

/// Upper-tail p-value of Pearson's statistic with `df` degrees of freedom.
pub fn chi2_p(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(df as f64).unwrap().cdf(stat)
}

/// Two-sample homogeneity test on histograms keyed by value. Cells with
/// fewer than 10 pooled observations are merged into one.
pub fn homogeneity_p<K: Ord>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut rest = (0.0, 0.0);
    for k in keys {
        let x = *a.get(k).unwrap_or(&0) as f64;
        let y = *b.get(k).unwrap_or(&0) as f64;
        if x + y < 10.0 {
            rest.0 += x;
            rest.1 += y;
        } else {
            cells.push((x, y));
        }
    }
    if rest.0 + rest.1 > 0.0 {
        cells.push(rest);
    }
    let (ra, rb) = ((nb as f64 / na as f64).sqrt(), (na as f64 / nb as f64).sqrt());
    let stat: f64 = cells.iter().map(|&(x, y)| (x * ra - y * rb).powi(2) / (x + y)).sum();
    chi2_p(stat, cells.len().saturating_sub(1))
}

/// Goodness of fit of observed counts against probabilities. Cells with
/// expected count below 5 are merged.
pub fn goodness_of_fit_p<K: Ord + Clone>(observed: &BTreeMap<K, u64>, probs: &BTreeMap<K, f64>) -> f64 {
    let total: u64 = observed.values().sum();
    let unexpected: u64 = observed.iter().filter(|(k, _)| !probs.contains_key(*k)).map(|(_, v)| v).sum();
    assert_eq!(unexpected, 0, "outcomes with zero probability were observed");
    let mut stat = 0.0;
    let mut cells = 0;
    let (mut small_o, mut small_e) = (0.0, 0.0);
    for (k, &p) in probs {
        let e = p * total as f64;
        let o = *observed.get(k).unwrap_or(&0) as f64;
        if e < 5.0 {
            small_o += o;
            small_e += e;
        } else {
            stat += (o - e).powi(2) / e;
            cells += 1;
        }
    }
    if small_e > 0.0 {
        stat += (small_o - small_e).powi(2) / small_e;
        cells += 1;
    }
    chi2_p(stat, cells - 1)
}

pub fn histogram<K: Ord>(values: impl IntoIterator<Item = K>) -> BTreeMap<K, u64> {
    let mut h = BTreeMap::new();
    for v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}
