//! Self-checks behind `tiermatch verify`.

use std::collections::BTreeMap;

use anyhow::Result;
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use tiermatch::coupon::{expectation_bounds, expectation_exact, harmonic};
use tiermatch::oracle::{
    check_golden, enumerate_expectations, enumerate_outcome_distribution, enumerate_stable_set, man_optimal,
    GoldenFile,
};
use tiermatch::rng::{rng_from_seed, run_rng};
use tiermatch::stats::Summary;
use tiermatch::{
    check_stability, generate_profile, run_da_excluding, run_da_explicit, run_da_lazy, smoothness_diagnostics,
    CouponSpec, MarketConfig, Side, SmoothnessConstants, TierConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Fast,
    Full,
}

pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn tiers(p: &[f64], s: &[f64]) -> TierConfig {
    TierConfig::new(p.to_vec(), s.to_vec()).expect("valid tiers")
}

fn random_tiers<R: Rng>(rng: &mut R, max_tiers: usize) -> TierConfig {
    let k = rng.random_range(1..=max_tiers);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let s = (0..k).map(|_| rng.random_range(1.0..10.0)).collect::<Vec<_>>();
    tiers(&raw.iter().map(|x| x / total).collect::<Vec<_>>(), &s)
}

fn random_market<R: Rng>(rng: &mut R, n: usize) -> Result<MarketConfig> {
    let k = n.min(3);
    Ok(MarketConfig::balanced(n, random_tiers(rng, k), random_tiers(rng, k))?)
}

fn golden(stored: Result<GoldenFile>) -> Check {
    match stored.and_then(|g| Ok(check_golden(&g)?)) {
        Ok(bad) if bad.is_empty() => check("golden", true, "every stored oracle case reproduces".into()),
        Ok(bad) => check("golden", false, format!("mismatched cases: {}", bad.join(", "))),
        Err(e) => check("golden", false, format!("cannot check golden file: {e:#}")),
    }
}

fn oracle_calibration() -> Result<Check> {
    let runs = 20_000u64;
    let markets = [
        MarketConfig::uniform(2)?,
        MarketConfig::balanced(2, tiers(&[0.5, 0.5], &[3.0, 1.0]), TierConfig::uniform())?,
    ];
    let mut worst = 0.0f64;
    for config in &markets {
        let exact = enumerate_expectations(config)?;
        let outcomes: Vec<_> = (0..runs).map(|r| run_da_lazy(config, &mut run_rng(7, r))).collect();
        let targets = [
            (exact.expected_man_rank, outcomes.iter().map(|o| o.mean_rank(Side::Man)).collect::<Vec<_>>()),
            (exact.expected_woman_rank, outcomes.iter().map(|o| o.mean_rank(Side::Woman)).collect()),
            (exact.expected_total_proposals, outcomes.iter().map(|o| o.total_proposals as f64).collect()),
        ];
        for (target, values) in targets {
            let s = Summary::of(&values);
            worst = worst.max((s.mean - target).abs() / s.stderr);
        }
    }
    Ok(check("oracle", worst <= 4.0, format!("worst deviation {worst:.2}σ over {runs} lazy runs per market at n = 2")))
}

fn stability(profiles: usize) -> Result<Check> {
    let mut rng = rng_from_seed(11);
    let (mut blocking, mut not_optimal) = (0, 0);
    for i in 0..profiles {
        let n = if i % 2 == 0 { rng.random_range(1..=6) } else { rng.random_range(7..=30) };
        let profile = generate_profile(&random_market(&mut rng, n)?, &mut rng);
        let out = run_da_explicit(&profile, None)?;
        blocking += check_stability(&out.matching, &profile)?.len();
        if n <= 6 && man_optimal(&enumerate_stable_set(&profile)?, &profile) != Some(&out.matching) {
            not_optimal += 1;
        }
    }
    Ok(check(
        "stability",
        blocking == 0 && not_optimal == 0,
        format!("{profiles} profiles: {blocking} blocking pairs, {not_optimal} not man-optimal"),
    ))
}

fn order_invariance(profiles: usize) -> Result<Check> {
    let mut rng = rng_from_seed(12);
    let mut differ = 0;
    for _ in 0..profiles {
        let n = rng.random_range(1..=30);
        let profile = generate_profile(&random_market(&mut rng, n)?, &mut rng);
        let base = run_da_explicit(&profile, None)?;
        for _ in 0..5 {
            let mut order: Vec<u32> = (0..n as u32).collect();
            order.shuffle(&mut rng);
            let other = run_da_explicit(&profile, Some(&order))?;
            differ += usize::from(other.matching != base.matching || other.total_proposals != base.total_proposals);
        }
    }
    Ok(check("order", differ == 0, format!("{differ} of {} reordered runs differ", profiles * 5)))
}

fn coupon() -> Result<Check> {
    let worst = (1..=200)
        .map(|n| {
            let e = expectation_exact(&CouponSpec::uniform(n)?)?;
            Ok((e - n as f64 * harmonic(n)).abs() / (n as f64 * harmonic(n)))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut rng = rng_from_seed(13);
    let mut outside = 0;
    for _ in 0..50 {
        let k = rng.random_range(1..=3);
        let counts: Vec<usize> = (0..k).map(|_| rng.random_range(1..=40)).collect();
        let scores: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..10.0)).collect();
        let total: f64 = counts.iter().zip(&scores).map(|(&c, s)| c as f64 * s).sum();
        let spec = CouponSpec::new(counts, scores.iter().map(|s| s / total).collect())?;
        let exact = expectation_exact(&spec)?;
        let (lo, hi) = expectation_bounds(&spec)?;
        outside += usize::from(!(lo <= exact && exact <= hi * (1.0 + 1e-12)));
    }
    Ok(check(
        "coupon",
        worst <= 1e-6 && outside == 0,
        format!("uniform identity worst relative error {worst:.1e}; {outside} of 50 random specs outside the bounds"),
    ))
}

fn chi2_upper(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(df as f64).expect("positive df").cdf(stat)
}

/// Goodness of fit of the lazy engine's outcome distribution against the
/// oracle, and homogeneity of lazy and explicit total-proposal counts.
fn mode_equivalence() -> Result<Check> {
    let config = MarketConfig::balanced(2, tiers(&[0.5, 0.5], &[3.0, 1.0]), tiers(&[0.5, 0.5], &[5.0, 1.0]))?;
    let exact = enumerate_outcome_distribution(&config)?;
    let runs = 50_000u64;
    let mut counts: BTreeMap<(Vec<u32>, u64), u64> = BTreeMap::new();
    for r in 0..runs {
        let o = run_da_lazy(&config, &mut run_rng(14, r));
        let wives = o.matching.wives().iter().map(|w| w.unwrap_or(u32::MAX)).collect();
        *counts.entry((wives, o.total_proposals)).or_default() += 1;
    }
    let mut expected: BTreeMap<(Vec<u32>, u64), f64> = BTreeMap::new();
    for e in &exact {
        *expected.entry((e.wife_of.clone(), e.total_proposals)).or_default() += e.probability;
    }
    let stat: f64 = expected
        .iter()
        .map(|(k, &p)| {
            let obs = *counts.get(k).unwrap_or(&0) as f64;
            let exp = p * runs as f64;
            (obs - exp).powi(2) / exp
        })
        .sum();
    let gof = chi2_upper(stat, expected.len() - 1);

    let tiered = MarketConfig::balanced(6, tiers(&[0.5, 0.5], &[3.0, 1.0]), tiers(&[0.5, 0.5], &[5.0, 1.0]))?;
    let m = 20_000u64;
    let mut lazy: BTreeMap<u64, f64> = BTreeMap::new();
    let mut explicit: BTreeMap<u64, f64> = BTreeMap::new();
    for r in 0..m {
        *lazy.entry(run_da_lazy(&tiered, &mut run_rng(15, r)).total_proposals).or_default() += 1.0;
        let profile = generate_profile(&tiered, &mut run_rng(16, r));
        *explicit.entry(run_da_explicit(&profile, None)?.total_proposals).or_default() += 1.0;
    }
    let (mut hstat, mut cells, mut rest) = (0.0, 0usize, (0.0, 0.0));
    let keys: std::collections::BTreeSet<u64> = lazy.keys().chain(explicit.keys()).copied().collect();
    let mut add = |x: f64, y: f64| {
        hstat += (x - y).powi(2) / (x + y);
        cells += 1;
    };
    for k in keys {
        let (x, y) = (*lazy.get(&k).unwrap_or(&0.0), *explicit.get(&k).unwrap_or(&0.0));
        if x + y < 10.0 {
            rest = (rest.0 + x, rest.1 + y);
        } else {
            add(x, y);
        }
    }
    if rest.0 + rest.1 > 0.0 {
        add(rest.0, rest.1);
    }
    let homog = chi2_upper(hstat, cells - 1);
    Ok(check(
        "modes",
        gof > 1e-3 && homog > 1e-3,
        format!("lazy vs oracle at n = 2: p = {gof:.3}; lazy vs explicit proposals at n = 6: p = {homog:.3}"),
    ))
}

fn smoothness() -> Result<Check> {
    let n = 5000;
    let config = MarketConfig::uniform(n)?;
    let constants = SmoothnessConstants::default_for(&config);
    let runs = 40u64;
    let smooth = (0..runs)
        .map(|r| Ok(smoothness_diagnostics(&run_da_excluding(&config, &[0], &mut run_rng(17, r))?, constants).is_smooth))
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&s| s)
        .count();
    Ok(check(
        "smoothness",
        smooth as u64 * 100 >= 95 * runs,
        format!("{smooth} of {runs} almost-complete runs at n = {n} are smooth"),
    ))
}

pub fn run(level: Level, golden_file: Result<GoldenFile>) -> Result<Vec<Check>> {
    let mut out = vec![golden(golden_file), oracle_calibration()?, stability(200)?, order_invariance(200)?];
    if level == Level::Full {
        out.push(coupon()?);
        out.push(mode_equivalence()?);
        out.push(smoothness()?);
    }
    Ok(out)
}
