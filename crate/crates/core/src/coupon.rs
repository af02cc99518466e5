//! Coupon collector with unequal, tiered probabilities.
//!
//! Coupons come in tiers; every coupon of tier `i` is drawn with
//! probability `p_i`, independently at each step. `T` is the number of
//! draws until every coupon has been seen.

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketConfig, TierConfig};

/// Largest number of tier-count sub-vectors the exact expectation visits.
pub const EXACT_TERM_BUDGET: u128 = 10_000_000;

const FRACTION_BITS: i64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouponSpec {
    tier_counts: Vec<usize>,
    tier_probs: Vec<f64>,
}

impl CouponSpec {
    pub fn new(tier_counts: Vec<usize>, tier_probs: Vec<f64>) -> Result<Self> {
        if tier_counts.is_empty() || tier_counts.len() != tier_probs.len() {
            return Err(Error::validation("tier_counts and tier_probs must be non-empty and equally long"));
        }
        if tier_counts.contains(&0) {
            return Err(Error::validation("tier counts must be positive"));
        }
        if tier_probs.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::validation("coupon probabilities must be positive"));
        }
        let mass: f64 = tier_counts.iter().zip(&tier_probs).map(|(&c, &p)| c as f64 * p).sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!("coupon probabilities sum to {mass}, not 1")));
        }
        Ok(CouponSpec { tier_counts, tier_probs })
    }

    /// Equal probabilities over `n` coupons.
    pub fn uniform(n: usize) -> Result<Self> {
        CouponSpec::new(vec![n], vec![1.0 / n as f64])
    }

    /// The women's side of a market: one coupon per woman, drawn in
    /// proportion to her score.
    pub fn for_women(config: &MarketConfig) -> Result<Self> {
        let sizes = config.women_layout().sizes();
        let scores = config.women().scores();
        let total: f64 = sizes.iter().zip(scores).map(|(&c, &a)| c as f64 * a).sum();
        CouponSpec::new(sizes.to_vec(), scores.iter().map(|a| a / total).collect())
    }

    pub fn tier_counts(&self) -> &[usize] {
        &self.tier_counts
    }

    pub fn tier_probs(&self) -> &[f64] {
        &self.tier_probs
    }

    pub fn len(&self) -> usize {
        self.tier_counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_prob(&self) -> f64 {
        self.tier_probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_prob(&self) -> f64 {
        self.tier_probs.iter().copied().fold(0.0, f64::max)
    }

    /// Number of coupons sharing the smallest probability.
    pub fn min_prob_count(&self) -> usize {
        let p = self.min_prob();
        self.tier_counts
            .iter()
            .zip(&self.tier_probs)
            .filter(|&(_, &q)| q == p)
            .map(|(&c, _)| c)
            .sum()
    }

    /// `∏ (count_i + 1)`, the size of the exact enumeration.
    pub fn exact_term_count(&self) -> u128 {
        self.tier_counts
            .iter()
            .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128 + 1))
            .unwrap_or(u128::MAX)
    }
}

/// `H_n = 1 + 1/2 + … + 1/n`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

/// Draws until every coupon has appeared.
pub fn simulate_collector<R: Rng + ?Sized>(spec: &CouponSpec, rng: &mut R) -> u64 {
    let counts = &spec.tier_counts;
    let mut cumulative = Vec::with_capacity(counts.len());
    let mut acc = 0.0;
    for (&c, &p) in counts.iter().zip(&spec.tier_probs) {
        acc += c as f64 * p;
        cumulative.push(acc);
    }
    let mut offsets = Vec::with_capacity(counts.len());
    let mut start = 0;
    for &c in counts {
        offsets.push(start);
        start += c;
    }
    let n = start;
    let mut seen = vec![false; n];
    let mut distinct = 0;
    let mut draws = 0u64;
    while distinct < n {
        draws += 1;
        let u = rng.random::<f64>() * acc;
        let tier = cumulative.iter().position(|&c| u < c).unwrap_or(counts.len() - 1);
        let coupon = offsets[tier] + rng.random_range(0..counts[tier]);
        if !seen[coupon] {
            seen[coupon] = true;
            distinct += 1;
        }
    }
    draws
}

/// `p = m · 2^e` with integer `m`.
fn dyadic(p: f64) -> (u64, i64) {
    let bits = p.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

/// Exact `E[T]` by inclusion–exclusion over tier-count sub-vectors.
///
/// Every term is evaluated as a fixed-point big integer, so the alternating
/// sum loses nothing to cancellation; the only rounding is one truncation
/// per term at 2⁻⁶⁴ and the final conversion to `f64`.
pub fn expectation_exact(spec: &CouponSpec) -> Result<f64> {
    let needed = spec.exact_term_count();
    if needed > EXACT_TERM_BUDGET {
        return Err(Error::Capacity {
            what: "exact coupon expectation terms",
            needed,
            limit: EXACT_TERM_BUDGET,
        });
    }
    let parts: Vec<(u64, i64)> = spec.tier_probs.iter().map(|&p| dyadic(p)).collect();
    let e_min = parts.iter().map(|&(_, e)| e).min().unwrap_or(0);
    // Σ j_i p_i = D · 2^e_min with D = Σ j_i A_i.
    let weights: Vec<BigUint> = parts.iter().map(|&(m, e)| BigUint::from(m) << ((e - e_min) as usize)).collect();
    let binomials: Vec<Vec<BigUint>> = spec.tier_counts.iter().map(|&c| binomial_row(c)).collect();
    let shift = (FRACTION_BITS - e_min) as usize;

    let k = spec.tier_counts.len();
    let mut j = vec![0usize; k];
    let mut denominator = BigUint::zero();
    let mut total = BigInt::zero();
    let mut size = 0usize;
    loop {
        let mut i = 0;
        while i < k && j[i] == spec.tier_counts[i] {
            denominator -= &weights[i] * BigUint::from(j[i]);
            size -= j[i];
            j[i] = 0;
            i += 1;
        }
        if i == k {
            break;
        }
        j[i] += 1;
        size += 1;
        denominator += &weights[i];

        let mut numerator = BigUint::from(1u8);
        for (row, &ji) in binomials.iter().zip(&j) {
            if ji > 0 {
                numerator *= &row[ji];
            }
        }
        let term = BigInt::from((numerator << shift) / &denominator);
        if size % 2 == 1 {
            total += term;
        } else {
            total -= term;
        }
    }
    let whole = &total >> (FRACTION_BITS as usize);
    let frac = &total - (&whole << (FRACTION_BITS as usize));
    let value = whole.to_f64().unwrap_or(f64::INFINITY) + frac.to_f64().unwrap_or(0.0) / 2f64.powi(FRACTION_BITS as i32);
    Ok(value)
}

fn binomial_row(c: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(c + 1);
    let mut v = BigUint::from(1u8);
    row.push(v.clone());
    for j in 1..=c {
        v = v * BigUint::from(c + 1 - j) / BigUint::from(j);
        row.push(v.clone());
    }
    row
}

/// Leading term `ln n / π_min`, which equals `(ε·α/α_min) · n ln n` for a
/// market's women.
pub fn expectation_asymptotic(spec: &CouponSpec) -> f64 {
    (spec.len() as f64).ln() / spec.min_prob()
}

/// `(ε·α/α_min) · n ln n`.
pub fn expectation_asymptotic_tiered(n: usize, women: &TierConfig) -> f64 {
    let n = n as f64;
    women.weighted_score() / women.min_score() * n * n.ln()
}

/// `(π_min⁻¹ ln(ε_min n), π_min⁻¹ H_n)`.
pub fn expectation_bounds(spec: &CouponSpec) -> Result<(f64, f64)> {
    bounds(spec.len(), spec.min_prob(), spec.min_prob_count() as f64)
}

/// Bounds for `n` coupons with tier proportions and scores of `women`.
pub fn expectation_bounds_tiered(n: usize, women: &TierConfig) -> Result<(f64, f64)> {
    bounds(n, women.min_draw_probability(n), women.min_score_proportion() * n as f64)
}

fn bounds(n: usize, pi_min: f64, rarest: f64) -> Result<(f64, f64)> {
    if rarest < 1.0 {
        return Err(Error::Domain(format!("ε_min · n = {rarest} is below 1")));
    }
    let upper = harmonic(n) / pi_min;
    let lower = rarest.ln() / pi_min;
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, run_rng};
    use crate::stats::Summary;
    use rand::Rng;

    const REL: f64 = 1e-6;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    /// `∫₀^∞ 1 − ∏(1 − e^{−p t}) dt` by composite Simpson on a substituted
    /// finite interval.
    fn integral_oracle(counts: &[usize], probs: &[f64]) -> f64 {
        let f = |t: f64| {
            1.0 - counts
                .iter()
                .zip(probs)
                .map(|(&c, &p)| (1.0 - (-p * t).exp()).powi(c as i32))
                .product::<f64>()
        };
        let pmin = probs.iter().copied().fold(f64::INFINITY, f64::min);
        let n: usize = counts.iter().sum();
        let end = (60.0 + (n as f64).ln()) / pmin;
        let steps = 200_000;
        let h = end / steps as f64;
        let mut s = f(0.0) + f(end);
        for i in 1..steps {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn validation() {
        assert!(CouponSpec::new(vec![], vec![]).is_err());
        assert!(CouponSpec::new(vec![2], vec![0.4]).is_err());
        assert!(CouponSpec::new(vec![1, 0], vec![1.0, 0.5]).is_err());
        assert!(CouponSpec::new(vec![2, 1], vec![0.5, 0.0]).is_err());
        assert!(CouponSpec::new(vec![2, 1], vec![0.25, 0.5]).is_ok());
    }

    #[test]
    fn small_exact_values() {
        assert_eq!(expectation_exact(&CouponSpec::uniform(1).unwrap()).unwrap(), 1.0);
        assert!(close(expectation_exact(&CouponSpec::uniform(2).unwrap()).unwrap(), 3.0, 1e-15));
        let e10 = expectation_exact(&CouponSpec::uniform(10).unwrap()).unwrap();
        assert!((e10 - 29.289_682_539_682_54).abs() < 1e-9, "{e10}");
        // p = (1/4, 3/4): 4 + 4/3 − 1.
        let two = CouponSpec::new(vec![1, 1], vec![0.25, 0.75]).unwrap();
        assert!(close(expectation_exact(&two).unwrap(), 13.0 / 3.0, 1e-15));
    }

    #[test]
    fn uniform_exact_matches_harmonic_closed_form() {
        for n in 1..=200 {
            let e = expectation_exact(&CouponSpec::uniform(n).unwrap()).unwrap();
            let h = n as f64 * harmonic(n);
            assert!(close(e, h, REL), "n={n}: {e} vs {h}");
        }
    }

    #[test]
    fn tiered_exact_matches_integral() {
        let cases: [(&[usize], &[f64]); 4] = [
            (&[3, 5], &[0.2, 0.08]),
            (&[2, 6, 12], &[3.0 / 30.0, 2.0 / 30.0, 1.0 / 30.0]),
            (&[20, 20], &[5.0 / 120.0, 1.0 / 120.0]),
            (&[10, 30], &[2.5 / 55.0, 1.0 / 55.0]),
        ];
        for (counts, probs) in cases {
            let spec = CouponSpec::new(counts.to_vec(), probs.to_vec()).unwrap();
            let e = expectation_exact(&spec).unwrap();
            let oracle = integral_oracle(counts, probs);
            assert!(close(e, oracle, 1e-7), "{counts:?}: {e} vs {oracle}");
        }
    }

    #[test]
    fn budget_is_enforced() {
        let spec = CouponSpec::new(vec![9999, 999], vec![0.5 / 9999.0, 0.5 / 999.0]).unwrap();
        assert_eq!(spec.exact_term_count(), 10_000_000);
        let over = CouponSpec::new(vec![10_000, 999], vec![0.5 / 10_000.0, 0.5 / 999.0]).unwrap();
        let err = expectation_exact(&over).unwrap_err();
        assert!(err.is_capacity());
        assert!(err.to_string().contains("10000000"), "{err}");
    }

    fn random_spec<R: Rng>(rng: &mut R) -> CouponSpec {
        let k = rng.random_range(1..=3);
        let counts: Vec<usize> = (0..k).map(|_| rng.random_range(1..=40)).collect();
        let scores: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..8.0)).collect();
        let total: f64 = counts.iter().zip(&scores).map(|(&c, s)| c as f64 * s).sum();
        CouponSpec::new(counts, scores.iter().map(|s| s / total).collect()).unwrap()
    }

    #[test]
    fn sandwich_on_random_specs() {
        let mut rng = rng_from_seed(404);
        for _ in 0..50 {
            let spec = random_spec(&mut rng);
            let e = expectation_exact(&spec).unwrap();
            let (lo, hi) = expectation_bounds(&spec).unwrap();
            // A single tier makes the upper bound an identity, equal up to
            // the rounding of H_n.
            assert!(lo <= e && e <= hi * (1.0 + 1e-12), "{spec:?}: {lo} {e} {hi}");
        }
    }

    #[test]
    fn simulation_matches_exact() {
        let specs = [
            CouponSpec::uniform(50).unwrap(),
            CouponSpec::new(vec![10, 30], vec![2.5 / 55.0, 1.0 / 55.0]).unwrap(),
        ];
        for (s, spec) in specs.iter().enumerate() {
            let draws: Vec<f64> = (0..10_000)
                .map(|r| simulate_collector(spec, &mut run_rng(170 + s as u64, r)) as f64)
                .collect();
            let sum = Summary::of(&draws);
            let e = expectation_exact(spec).unwrap();
            assert!((sum.mean - e).abs() <= 3.0 * sum.stderr, "{} vs {e} ± {}", sum.mean, sum.stderr);
        }
    }

    #[test]
    fn simulation_examples() {
        assert_eq!(simulate_collector(&CouponSpec::uniform(1).unwrap(), &mut rng_from_seed(0)), 1);
        let two = CouponSpec::uniform(2).unwrap();
        let mut rng = rng_from_seed(1);
        let mean = (0..100_000).map(|_| simulate_collector(&two, &mut rng) as f64).sum::<f64>() / 1e5;
        assert!(close(mean, 3.0, 0.02), "{mean}");
        let hundred = CouponSpec::uniform(100).unwrap();
        let mean = (0..2_000).map(|_| simulate_collector(&hundred, &mut rng) as f64).sum::<f64>() / 2e3;
        assert!(close(mean, 518.7, 0.02), "{mean}");
    }

    fn perturbed(spec: &CouponSpec, tier: usize, delta: f64, donor: Option<usize>) -> CouponSpec {
        // Split coupon 0 of `tier` into its own tier with probability
        // raised by `delta`; the mass comes pro-rata from the rest of its
        // tier, or from every coupon of `donor`.
        let mut counts = spec.tier_counts.clone();
        let mut probs = spec.tier_probs.clone();
        let p = probs[tier];
        match donor {
            None => {
                let rest = counts[tier] - 1;
                probs[tier] = p - delta / rest as f64;
            }
            Some(d) => {
                probs[d] -= delta / counts[d] as f64;
                if counts[tier] > 1 {
                    counts[tier] -= 1;
                } else {
                    counts.remove(tier);
                    probs.remove(tier);
                }
            }
        }
        if donor.is_none() {
            counts[tier] -= 1;
        }
        counts.push(1);
        probs.push(p + delta);
        CouponSpec::new(counts, probs).unwrap()
    }

    #[test]
    fn transfer_to_a_rarer_coupon_lowers_the_expectation() {
        let mut rng = rng_from_seed(8);
        let mut checked = 0;
        while checked < 20 {
            let spec = random_spec(&mut rng);
            if spec.tier_counts.len() < 2 {
                continue;
            }
            let poor = (0..spec.tier_probs.len())
                .min_by(|&a, &b| spec.tier_probs[a].total_cmp(&spec.tier_probs[b]))
                .unwrap();
            let rich = (0..spec.tier_probs.len())
                .max_by(|&a, &b| spec.tier_probs[a].total_cmp(&spec.tier_probs[b]))
                .unwrap();
            let (pp, pr, cr) = (spec.tier_probs[poor], spec.tier_probs[rich], spec.tier_counts[rich] as f64);
            if pr <= pp {
                continue;
            }
            // Keep the raised coupon no likelier than the lowered donors.
            let delta = 0.5 * (pr - pp) * cr / (cr + 1.0);
            let after = perturbed(&spec, poor, delta, Some(rich));
            let (e0, e1) = (expectation_exact(&spec).unwrap(), expectation_exact(&after).unwrap());
            assert!(e1 < e0, "{spec:?}: {e0} -> {e1}");
            checked += 1;
        }
    }

    #[test]
    fn within_tier_spread_raises_the_expectation() {
        let mut rng = rng_from_seed(9);
        let mut checked = 0;
        while checked < 20 {
            let spec = random_spec(&mut rng);
            let Some(tier) = spec.tier_counts.iter().position(|&c| c >= 2) else {
                continue;
            };
            let delta = 0.2 * spec.tier_probs[tier];
            let after = perturbed(&spec, tier, delta, None);
            let (e0, e1) = (expectation_exact(&spec).unwrap(), expectation_exact(&after).unwrap());
            assert!(e1 > e0, "{spec:?}: {e0} -> {e1}");
            checked += 1;
        }
    }

    #[test]
    fn asymptotic_examples() {
        assert!((expectation_asymptotic(&CouponSpec::uniform(1000).unwrap()) - 6907.755).abs() < 1e-2);
        let fig = TierConfig::new(vec![1.0 / 16.0, 5.0 / 16.0, 5.0 / 8.0], vec![3.0, 2.0, 1.0]).unwrap();
        let a = expectation_asymptotic_tiered(1000, &fig);
        assert!((a - 23.0 / 16.0 * 1000.0 * 1000f64.ln()).abs() < 1e-9);
        assert!((a - 9930.0).abs() < 0.5, "{a}");
        let u200 = CouponSpec::uniform(200).unwrap();
        let ratio = expectation_asymptotic(&u200) / expectation_exact(&u200).unwrap();
        assert!((ratio - 0.901).abs() < 1e-3 && ratio > 0.85, "{ratio}");
    }

    #[test]
    fn spec_and_tiered_forms_agree() {
        let women = TierConfig::new(vec![0.5, 0.5], vec![5.0, 1.0]).unwrap();
        let config = MarketConfig::balanced(1000, TierConfig::uniform(), women.clone()).unwrap();
        let spec = CouponSpec::for_women(&config).unwrap();
        assert_eq!(spec.tier_counts(), &[500, 500]);
        assert!(close(expectation_asymptotic(&spec), expectation_asymptotic_tiered(1000, &women), 1e-12));
        let (a, b) = (expectation_bounds(&spec).unwrap(), expectation_bounds_tiered(1000, &women).unwrap());
        assert!(close(a.0, b.0, 1e-12) && close(a.1, b.1, 1e-12));
    }

    #[test]
    fn bound_examples() {
        let u = CouponSpec::uniform(100).unwrap();
        let (lo, hi) = expectation_bounds(&u).unwrap();
        let exact = expectation_exact(&u).unwrap();
        assert!(close(hi, exact, REL) && (hi - 518.7).abs() < 0.1);
        assert!((lo - 100.0 * 100f64.ln()).abs() < 1e-9 && (lo - 460.5).abs() < 0.1);

        let women = TierConfig::new(vec![0.5, 0.5], vec![5.0, 1.0]).unwrap();
        let (lo, hi) = expectation_bounds_tiered(1000, &women).unwrap();
        assert!(close(hi, 3000.0 * harmonic(1000), 1e-12));
        assert!((hi - 22_456.4).abs() < 0.1, "{hi}");
        assert!((lo - 18_644.0).abs() < 1.0, "{lo}");

        let config = MarketConfig::balanced(1000, TierConfig::uniform(), women).unwrap();
        let spec = CouponSpec::for_women(&config).unwrap();
        let mut rng = rng_from_seed(5);
        let mean = (0..200).map(|_| simulate_collector(&spec, &mut rng) as f64).sum::<f64>() / 200.0;
        assert!(lo < mean && mean < hi, "{lo} {mean} {hi}");
    }

    #[test]
    fn rare_tier_smaller_than_one_coupon_is_a_domain_error() {
        let women = TierConfig::new(vec![0.9995, 0.0005], vec![5.0, 1.0]).unwrap();
        assert!(matches!(expectation_bounds_tiered(1000, &women), Err(Error::Domain(_))));
        assert!(expectation_bounds_tiered(4000, &women).is_ok());
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(100) - 5.187_377_517_639_621).abs() < 1e-12);
    }
}
