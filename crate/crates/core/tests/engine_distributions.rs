mod common;

use std::collections::BTreeMap;

use common::*;
use tiermatch::coupon::{expectation_exact, harmonic, simulate_collector, CouponSpec};
use tiermatch::da::{run_da_lazy_with, EngineOptions};
use tiermatch::oracle::enumerate_outcome_distribution;
use tiermatch::rng::{point_run_rng, run_rng};
use tiermatch::stats::Summary;
use tiermatch::*;

const P_MIN: f64 = 0.001;

type Key = (Vec<u32>, Vec<u32>, Vec<u32>, u64);

fn key(o: &MatchingOutcome) -> Key {
    (
        o.matching.wives().iter().map(|w| w.unwrap()).collect(),
        o.man_rank.iter().map(|r| r.unwrap()).collect(),
        o.woman_rank.iter().map(|r| r.unwrap()).collect(),
        o.total_proposals,
    )
}

fn oracle_probs(config: &MarketConfig) -> BTreeMap<Key, f64> {
    enumerate_outcome_distribution(config)
        .unwrap()
        .into_iter()
        .map(|o| ((o.wife_of, o.man_rank, o.woman_rank, o.total_proposals), o.probability))
        .collect()
}

#[test]
fn lazy_engine_matches_oracle_at_two() {
    let markets = [
        MarketConfig::uniform(2).unwrap(),
        MarketConfig::balanced(2, tiers(&[0.5, 0.5], &[3.0, 1.0]), TierConfig::uniform()).unwrap(),
        two_tier_market(2),
    ];
    let runs = 100_000u64;
    for (p, config) in markets.iter().enumerate() {
        let probs = oracle_probs(config);
        let observed = histogram((0..runs).map(|r| key(&run_da_lazy(config, &mut point_run_rng(11, p as u64, r)))));
        for (k, &prob) in &probs {
            let f = *observed.get(k).unwrap_or(&0) as f64 / runs as f64;
            let sigma = (prob * (1.0 - prob) / runs as f64).sqrt();
            assert!((f - prob).abs() <= 3.0 * sigma, "market {p} outcome {k:?}: {f} vs {prob}");
        }
        assert!(observed.keys().all(|k| probs.contains_key(k)));
    }
}

#[test]
fn explicit_engine_matches_oracle_at_three() {
    let markets = [
        MarketConfig::uniform(3).unwrap(),
        MarketConfig::balanced(3, tiers(&[1.0 / 3.0, 2.0 / 3.0], &[3.0, 1.0]), tiers(&[2.0 / 3.0, 1.0 / 3.0], &[2.0, 1.0]))
            .unwrap(),
    ];
    for (p, config) in markets.iter().enumerate() {
        let probs = oracle_probs(config);
        let observed = histogram((0..100_000u64).map(|r| {
            let profile = generate_profile(config, &mut point_run_rng(12, p as u64, r));
            key(&run_da_explicit(&profile, None).unwrap())
        }));
        let pv = goodness_of_fit_p(&observed, &probs);
        assert!(pv > P_MIN, "market {p}: p = {pv}");
    }
}

/// Rank of the last man (or woman) of each tier, one draw per run.
fn tier_probe(config: &MarketConfig, o: &MatchingOutcome) -> Vec<(usize, u32, u32)> {
    let mut out = Vec::new();
    for side in [Side::Man, Side::Woman] {
        let layout = config.layout(side);
        for t in 0..layout.tier_count() {
            let a = layout.range(t).end - 1;
            out.push((side as usize, t as u32, o.ranks(side)[a].unwrap()));
        }
    }
    out
}

fn probe_histograms(config: &MarketConfig, outcomes: impl Iterator<Item = MatchingOutcome>) -> BTreeMap<(usize, u32), BTreeMap<u32, u64>> {
    let mut h: BTreeMap<(usize, u32), BTreeMap<u32, u64>> = BTreeMap::new();
    for o in outcomes {
        for (side, tier, rank) in tier_probe(config, &o) {
            *h.entry((side, tier)).or_default().entry(rank).or_insert(0) += 1;
        }
    }
    h
}

#[test]
fn excluding_and_resuming_matches_a_full_run() {
    let config = convergence_market(50);
    let runs = 5000u64;
    let full = probe_histograms(&config, (0..runs).map(|r| run_da_lazy(&config, &mut point_run_rng(13, 0, r))));
    let resumed = probe_histograms(
        &config,
        (0..runs).map(|r| {
            let mut rng = point_run_rng(13, 1, r);
            let state = run_da_excluding(&config, &[0], &mut rng).unwrap();
            let out = resume_da(state, &mut rng);
            let profile_free_check = out.total_proposals == out.man_rank.iter().map(|r| r.unwrap() as u64).sum::<u64>();
            assert!(profile_free_check);
            out
        }),
    );
    for (cell, a) in &full {
        let pv = homogeneity_p(a, &resumed[cell]);
        assert!(pv > P_MIN, "{cell:?}: p = {pv}");
    }
}

#[test]
fn binomial_rank_shortcut_matches_per_man_trials() {
    let config = convergence_market(100);
    let runs = 5000u64;
    let config = &config;
    let with = |threshold: usize, point: u64| {
        let options = EngineOptions { binomial_rank_threshold: threshold, record_profile: false };
        probe_histograms(
            config,
            (0..runs).map(|r| run_da_lazy_with(config, &options, &mut point_run_rng(14, point, r)).outcome),
        )
    };
    let (fresh, binomial) = (with(usize::MAX, 0), with(0, 1));
    for (cell, a) in fresh.iter().filter(|(c, _)| c.0 == Side::Woman as usize) {
        let pv = homogeneity_p(a, &binomial[cell]);
        assert!(pv > P_MIN, "{cell:?}: p = {pv}");
    }
    let mean = |h: &BTreeMap<(usize, u32), BTreeMap<u32, u64>>| {
        let t: u64 = h.iter().filter(|(c, _)| c.0 == 1).flat_map(|(_, m)| m.iter().map(|(r, c)| *r as u64 * c)).sum();
        t as f64 / (runs * 3) as f64
    };
    assert!((mean(&fresh) / mean(&binomial) - 1.0).abs() < 0.05);
}

#[test]
fn longest_proposal_sequence_is_polylogarithmic() {
    let options = EngineOptions { binomial_rank_threshold: 0, record_profile: false };
    for n in [1usize << 10, 1 << 14] {
        let config = convergence_market(n);
        let worst = (0..100)
            .map(|r| run_da_lazy_with(&config, &options, &mut run_rng(15, r)).outcome.max_proposals_by_any_proposer)
            .max()
            .unwrap();
        let ln = (n as f64).ln();
        assert!((worst as f64) <= 15.0 * ln * ln, "n={n}: {worst}");
    }
}

#[test]
fn reproposal_draws_are_a_coupon_collector_time() {
    let config = MarketConfig::uniform(100).unwrap();
    let mut draws = Vec::new();
    for r in 0..2000 {
        let (o, d) = run_da_with_reproposals(&config, &mut run_rng(16, r)).unwrap();
        assert!(d >= o.total_proposals);
        draws.push(d as f64);
    }
    let s = Summary::of(&draws);
    let exact = expectation_exact(&CouponSpec::uniform(100).unwrap()).unwrap();
    assert!((exact - 100.0 * harmonic(100)).abs() < 1e-9 && (exact - 518.74).abs() < 0.01);
    assert!((s.mean / exact - 1.0).abs() <= 0.02, "{} vs {exact}", s.mean);

    let spec = CouponSpec::uniform(100).unwrap();
    let sim: Vec<f64> = (0..2000).map(|r| simulate_collector(&spec, &mut run_rng(17, r)) as f64).collect();
    let t = Summary::of(&sim);
    let se = (s.stderr.powi(2) + t.stderr.powi(2)).sqrt();
    assert!((s.mean - t.mean).abs() <= 3.0 * se, "{} vs {}", s.mean, t.mean);
}

#[test]
fn reproposal_matching_matches_lazy_matching() {
    let config = convergence_market(30);
    let runs = 5000u64;
    let lazy = probe_histograms(&config, (0..runs).map(|r| run_da_lazy(&config, &mut point_run_rng(18, 0, r))));
    let repro = probe_histograms(
        &config,
        (0..runs).map(|r| run_da_with_reproposals(&config, &mut point_run_rng(18, 1, r)).unwrap().0),
    );
    for (cell, a) in &lazy {
        let pv = homogeneity_p(a, &repro[cell]);
        assert!(pv > P_MIN, "{cell:?}: p = {pv}");
    }
}

#[test]
fn tiered_reproposal_draws_match_the_collector() {
    let config = two_tier_market(60);
    let spec = CouponSpec::for_women(&config).unwrap();
    let a: Vec<f64> = (0..4000).map(|r| run_da_with_reproposals(&config, &mut run_rng(19, r)).unwrap().1 as f64).collect();
    let b: Vec<f64> = (0..4000).map(|r| simulate_collector(&spec, &mut run_rng(20, r)) as f64).collect();
    let (sa, sb) = (Summary::of(&a), Summary::of(&b));
    let exact = expectation_exact(&spec).unwrap();
    assert!((sa.mean - exact).abs() <= 3.0 * sa.stderr, "{} vs {exact}", sa.mean);
    assert!((sb.mean - exact).abs() <= 3.0 * sb.stderr, "{} vs {exact}", sb.mean);
}

#[test]
fn lazy_and_explicit_tier_ranks_agree() {
    let config = convergence_market(1024);
    let runs = 300u64;
    let per_tier = |f: &dyn Fn(u64) -> MatchingOutcome| -> Vec<Summary> {
        let outcomes: Vec<Vec<f64>> = (0..runs)
            .map(|r| f(r).tier_summaries(Side::Man).iter().map(|s| s.mean_rank).collect())
            .collect();
        (0..2).map(|j| Summary::of(&outcomes.iter().map(|o| o[j]).collect::<Vec<_>>())).collect()
    };
    let lazy = per_tier(&|r| run_da_lazy(&config, &mut run_rng(61, r)));
    let explicit = per_tier(&|r| {
        let clocks = tiermatch::market::ClockProfile::generate(&config, &mut run_rng(62, r));
        tiermatch::da::run_da_on_clocks(&config, &clocks)
    });
    for (a, b) in lazy.iter().zip(&explicit) {
        let z = (a.mean - b.mean).abs() / (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        assert!(z < 4.0, "lazy {} vs explicit {} ({z:.2}σ)", a.mean, b.mean);
    }
    let ratio = |s: &[Summary]| s[1].mean / s[0].mean;
    assert!((ratio(&lazy) - ratio(&explicit)).abs() < 0.1, "{} vs {}", ratio(&lazy), ratio(&explicit));
}
