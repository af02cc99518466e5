//! Exact expectations for tiny markets by enumerating every profile.
//!
//! Each man's list is a weighted draw without replacement over the women,
//! so the probability of a complete profile is a product of sequential
//! sampling probabilities. When every score is a simple rational the sums
//! are carried out in exact rational arithmetic.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::da::{check_stability, run_da_explicit, Matching};
use crate::error::{Error, Result};
use crate::market::{MarketConfig, MarketFile, PreferenceProfile, TierConfig};

/// Largest number of weighted profiles `enumerate_expectations` visits.
pub const PROFILE_BUDGET: u128 = 100_000_000;
/// Largest market `enumerate_stable_set` accepts.
pub const STABLE_SET_MAX_N: usize = 8;

const MAX_DENOMINATOR: i128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    ExactRational,
    Float64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub n: usize,
    pub precision: Precision,
    pub profile_count: u64,
    pub probability_mass: f64,
    /// Relative error bound of every reported value in `Float64` mode.
    pub error_bound: f64,
    pub expected_man_rank_by_tier: Vec<f64>,
    pub expected_woman_rank_by_tier: Vec<f64>,
    pub expected_man_rank: f64,
    pub expected_woman_rank: f64,
    /// Rows are women's tiers, columns men's tiers.
    pub match_type_prob: Vec<Vec<f64>>,
    pub expected_total_proposals: f64,
    /// The same values as reduced fractions, in exact mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactValues>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactValues {
    pub expected_man_rank_by_tier: Vec<String>,
    pub expected_woman_rank_by_tier: Vec<String>,
    pub expected_man_rank: String,
    pub expected_woman_rank: String,
    pub match_type_prob: Vec<Vec<String>>,
    pub expected_total_proposals: String,
}

/// One distinct DA outcome and its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeProbability {
    pub wife_of: Vec<u32>,
    pub man_rank: Vec<u32>,
    pub woman_rank: Vec<u32>,
    pub total_proposals: u64,
    pub probability: f64,
}

type OutcomeKey = (Vec<u32>, Vec<u32>, Vec<u32>, u64);

trait Weight: Num + Clone + FromPrimitive + ToPrimitive {
    fn render(&self) -> Option<String>;
}

impl Weight for f64 {
    fn render(&self) -> Option<String> {
        None
    }
}

impl Weight for BigRational {
    fn render(&self) -> Option<String> {
        Some(self.to_string())
    }
}

/// `p/q` with `q ≤ 10⁶` whose `f64` value equals `x` exactly.
fn simple_rational(x: f64) -> Option<(i128, i128)> {
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let a = a as i128;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > MAX_DENOMINATOR {
            return None;
        }
        if h2 as f64 / k2 as f64 == x {
            return Some((h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

fn permutations(n: usize) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, used: &mut [bool], out: &mut Vec<Vec<u32>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i as u32);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn order_probability<T: Weight>(weights: &[T], order: &[u32]) -> T {
    let mut remaining = weights.iter().cloned().fold(T::zero(), |a, b| a + b);
    let mut p = T::one();
    for &i in order {
        let w = weights[i as usize].clone();
        p = p * w.clone() / remaining.clone();
        remaining = remaining - w;
    }
    p
}

/// Every combination of one permutation per agent, with its probability.
fn side_combinations<T: Weight>(perms: &[Vec<u32>], probs: &[T], agents: usize) -> Vec<(Vec<usize>, T)> {
    let mut out = vec![(Vec::new(), T::one())];
    for _ in 0..agents {
        let mut next = Vec::with_capacity(out.len() * perms.len());
        for (choice, p) in &out {
            for (k, q) in probs.iter().enumerate() {
                let mut c = choice.clone();
                c.push(k);
                next.push((c, p.clone() * q.clone()));
            }
        }
        out = next;
    }
    out
}

fn check_budget(config: &MarketConfig) -> Result<usize> {
    if !config.is_balanced() {
        return Err(Error::validation("the exact oracle needs a balanced market"));
    }
    let n = config.n_men();
    let needed = factorial(n).checked_pow(2 * n as u32).unwrap_or(u128::MAX);
    if needed > PROFILE_BUDGET {
        return Err(Error::Capacity {
            what: "enumerated preference profiles",
            needed,
            limit: PROFILE_BUDGET,
        });
    }
    Ok(n)
}

fn distribution<T: Weight>(config: &MarketConfig, men_w: &[T], women_w: &[T]) -> Result<(BTreeMap<OutcomeKey, T>, u64)> {
    let n = config.n_men();
    let perms = permutations(n);
    // Every man draws over the women's weights and vice versa.
    let man_probs: Vec<T> = perms.iter().map(|p| order_probability(women_w, p)).collect();
    let woman_probs: Vec<T> = perms.iter().map(|p| order_probability(men_w, p)).collect();
    let men = side_combinations(&perms, &man_probs, n);
    let women = side_combinations(&perms, &woman_probs, n);
    let mut dist: BTreeMap<OutcomeKey, T> = BTreeMap::new();
    let mut count = 0u64;
    for (mc, mp) in &men {
        let men_prefs: Vec<Vec<u32>> = mc.iter().map(|&k| perms[k].clone()).collect();
        for (wc, wp) in &women {
            let women_prefs: Vec<Vec<u32>> = wc.iter().map(|&k| perms[k].clone()).collect();
            let profile = PreferenceProfile::for_market(men_prefs.clone(), women_prefs, config)?;
            let out = run_da_explicit(&profile, None)?;
            let key = (
                out.matching.wives().iter().map(|w| w.expect("balanced DA matches everyone")).collect(),
                out.man_rank.iter().map(|r| r.unwrap_or(0)).collect(),
                out.woman_rank.iter().map(|r| r.unwrap_or(0)).collect(),
                out.total_proposals,
            );
            let w = mp.clone() * wp.clone();
            let entry = dist.entry(key).or_insert_with(T::zero);
            *entry = entry.clone() + w;
            count += 1;
        }
    }
    Ok((dist, count))
}

fn scores_as<T: Weight>(config: &MarketConfig, exact: &[Option<(i128, i128)>], men: bool) -> Vec<T> {
    let n = if men { config.n_men() } else { config.n_women() };
    let k = if men { 0 } else { config.men().tier_count() };
    let layout = if men { config.men_layout() } else { config.women_layout() };
    (0..n)
        .map(|a| {
            let (p, q) = exact[k + layout.tier_of(a)].expect("rational scores");
            T::from_i128(p).unwrap() / T::from_i128(q).unwrap()
        })
        .collect()
}

/// By-tier man ranks, by-tier woman ranks, man rank, woman rank, match
/// types, proposals, total mass.
type Summaries<T> = (Vec<T>, Vec<T>, T, T, Vec<Vec<T>>, T, T);

fn summarize<T: Weight>(config: &MarketConfig, dist: &BTreeMap<OutcomeKey, T>) -> Summaries<T> {
    let (ml, wl) = (config.men_layout(), config.women_layout());
    let n = config.n_men();
    let int = |v: u64| T::from_u64(v).unwrap();
    let mut men_rank = vec![T::zero(); ml.tier_count()];
    let mut women_rank = vec![T::zero(); wl.tier_count()];
    let mut men_avg = T::zero();
    let mut women_avg = T::zero();
    let mut types = vec![vec![T::zero(); ml.tier_count()]; wl.tier_count()];
    let mut proposals = T::zero();
    let mut mass = T::zero();
    for ((wives, mr, wr, total), p) in dist {
        mass = mass + p.clone();
        proposals = proposals + p.clone() * int(*total);
        for j in 0..ml.tier_count() {
            let s: u64 = mr[ml.range(j)].iter().map(|&r| r as u64).sum();
            men_rank[j] = men_rank[j].clone() + p.clone() * int(s) / int(ml.size(j) as u64);
        }
        for i in 0..wl.tier_count() {
            let s: u64 = wr[wl.range(i)].iter().map(|&r| r as u64).sum();
            women_rank[i] = women_rank[i].clone() + p.clone() * int(s) / int(wl.size(i) as u64);
        }
        men_avg = men_avg + p.clone() * int(mr.iter().map(|&r| r as u64).sum()) / int(n as u64);
        women_avg = women_avg + p.clone() * int(wr.iter().map(|&r| r as u64).sum()) / int(n as u64);
        for (m, &w) in wives.iter().enumerate() {
            let (i, j) = (wl.tier_of(w as usize), ml.tier_of(m));
            types[i][j] = types[i][j].clone() + p.clone() / int(wl.size(i) as u64);
        }
    }
    (men_rank, women_rank, men_avg, women_avg, types, proposals, mass)
}

fn exact_scores(config: &MarketConfig) -> Option<Vec<Option<(i128, i128)>>> {
    let all: Vec<Option<(i128, i128)>> = config
        .men()
        .scores()
        .iter()
        .chain(config.women().scores())
        .map(|&s| simple_rational(s))
        .collect();
    all.iter().all(Option::is_some).then_some(all)
}

fn float_scores(config: &MarketConfig) -> (Vec<f64>, Vec<f64>) {
    (config.weights(crate::market::Side::Man), config.weights(crate::market::Side::Woman))
}

fn build_result<T: Weight>(config: &MarketConfig, dist: &BTreeMap<OutcomeKey, T>, count: u64, precision: Precision) -> ExactResult {
    let (mr, wr, ma, wa, types, prop, mass) = summarize(config, dist);
    let f = |v: &T| v.to_f64().unwrap_or(f64::NAN);
    let fv = |v: &[T]| v.iter().map(f).collect::<Vec<_>>();
    let exact = mass.render().map(|_| ExactValues {
        expected_man_rank_by_tier: mr.iter().map(|v| v.render().unwrap()).collect(),
        expected_woman_rank_by_tier: wr.iter().map(|v| v.render().unwrap()).collect(),
        expected_man_rank: ma.render().unwrap(),
        expected_woman_rank: wa.render().unwrap(),
        match_type_prob: types.iter().map(|r| r.iter().map(|v| v.render().unwrap()).collect()).collect(),
        expected_total_proposals: prop.render().unwrap(),
    });
    let n = config.n_men();
    let error_bound = match precision {
        Precision::ExactRational => 0.0,
        // Each profile weight takes about 4n² roundings; each sum adds one
        // per profile.
        Precision::Float64 => (4 * n * n) as f64 * f64::EPSILON + count as f64 * f64::EPSILON,
    };
    ExactResult {
        n,
        precision,
        profile_count: count,
        probability_mass: f(&mass),
        error_bound,
        expected_man_rank_by_tier: fv(&mr),
        expected_woman_rank_by_tier: fv(&wr),
        expected_man_rank: f(&ma),
        expected_woman_rank: f(&wa),
        match_type_prob: types.iter().map(|r| fv(r)).collect(),
        expected_total_proposals: f(&prop),
        exact,
    }
}

/// Exact expectations of a balanced market with `(n!)^(2n) ≤ 10⁸`.
pub fn enumerate_expectations(config: &MarketConfig) -> Result<ExactResult> {
    check_budget(config)?;
    match exact_scores(config) {
        Some(ex) => {
            let men: Vec<BigRational> = scores_as(config, &ex, true);
            let women: Vec<BigRational> = scores_as(config, &ex, false);
            let (dist, count) = distribution(config, &men, &women)?;
            Ok(build_result(config, &dist, count, Precision::ExactRational))
        }
        None => {
            let (men, women) = float_scores(config);
            let (dist, count) = distribution(config, &men, &women)?;
            Ok(build_result(config, &dist, count, Precision::Float64))
        }
    }
}

/// Probability of every distinct `(matching, ranks, total proposals)`
/// outcome of man-proposing DA.
pub fn enumerate_outcome_distribution(config: &MarketConfig) -> Result<Vec<OutcomeProbability>> {
    check_budget(config)?;
    let to_vec = |dist: BTreeMap<OutcomeKey, f64>| {
        dist.into_iter()
            .map(|((wife_of, man_rank, woman_rank, total_proposals), probability)| OutcomeProbability {
                wife_of,
                man_rank,
                woman_rank,
                total_proposals,
                probability,
            })
            .collect()
    };
    match exact_scores(config) {
        Some(ex) => {
            let men: Vec<BigRational> = scores_as(config, &ex, true);
            let women: Vec<BigRational> = scores_as(config, &ex, false);
            let (dist, _) = distribution(config, &men, &women)?;
            Ok(to_vec(dist.into_iter().map(|(k, v)| (k, v.to_f64().unwrap_or(f64::NAN))).collect()))
        }
        None => {
            let (men, women) = float_scores(config);
            Ok(to_vec(distribution(config, &men, &women)?.0))
        }
    }
}

/// Every stable matching of a balanced profile with at most 8 agents per
/// side, in lexicographic order of the men's partners.
pub fn enumerate_stable_set(profile: &PreferenceProfile) -> Result<Vec<Matching>> {
    let n = profile.n_men();
    if n != profile.n_women() {
        return Err(Error::validation("stable set enumeration needs a balanced profile"));
    }
    if n > STABLE_SET_MAX_N {
        return Err(Error::Capacity {
            what: "candidate matchings",
            needed: factorial(n),
            limit: factorial(STABLE_SET_MAX_N),
        });
    }
    let mut stable = Vec::new();
    for perm in permutations(n) {
        let pairs: Vec<(u32, u32)> = perm.iter().enumerate().map(|(m, &w)| (m as u32, w)).collect();
        let matching = Matching::from_pairs(n, n, &pairs)?;
        if check_stability(&matching, profile)?.is_empty() {
            stable.push(matching);
        }
    }
    Ok(stable)
}

/// The element of `stable` that every man weakly prefers to all others.
pub fn man_optimal<'a>(stable: &'a [Matching], profile: &PreferenceProfile) -> Option<&'a Matching> {
    stable.iter().find(|cand| {
        stable.iter().all(|other| {
            (0..profile.n_men()).all(|m| {
                let rank = |x: &Matching| x.wife_of(m).map(|w| profile.man_rank_of(m, w as usize));
                rank(cand) <= rank(other)
            })
        })
    })
}

/// Markets whose exact results are kept as golden values.
pub fn golden_configs() -> Vec<(String, MarketConfig)> {
    let t = |p: &[f64], s: &[f64]| TierConfig::new(p.to_vec(), s.to_vec()).expect("valid tiers");
    let cases = [
        ("uniform_n1", MarketConfig::uniform(1)),
        ("uniform_n2", MarketConfig::uniform(2)),
        ("uniform_n3", MarketConfig::uniform(3)),
        ("men_tiered_n2", MarketConfig::balanced(2, t(&[0.5, 0.5], &[3.0, 1.0]), TierConfig::uniform())),
        ("both_tiered_n2", MarketConfig::balanced(2, t(&[0.5, 0.5], &[3.0, 1.0]), t(&[0.5, 0.5], &[5.0, 1.0]))),
        (
            "both_tiered_n3",
            MarketConfig::balanced(3, t(&[1.0 / 3.0, 2.0 / 3.0], &[3.0, 1.0]), t(&[2.0 / 3.0, 1.0 / 3.0], &[2.0, 1.0])),
        ),
        ("irrational_n2", MarketConfig::balanced(2, t(&[0.5, 0.5], &[std::f64::consts::PI, 1.0]), TierConfig::uniform())),
    ];
    cases.into_iter().map(|(name, c)| (name.to_string(), c.expect("valid market"))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub config: MarketFile,
    pub result: ExactResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenFile {
    pub cases: Vec<GoldenCase>,
}

/// Recompute every golden case.
pub fn golden_file() -> Result<GoldenFile> {
    let cases = golden_configs()
        .into_iter()
        .map(|(name, config)| {
            Ok(GoldenCase {
                name,
                config: MarketFile::from(&config),
                result: enumerate_expectations(&config)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GoldenFile { cases })
}

/// Names of cases in `stored` whose values differ from a fresh computation.
pub fn check_golden(stored: &GoldenFile) -> Result<Vec<String>> {
    let mut bad = Vec::new();
    for case in &stored.cases {
        let config = MarketConfig::try_from(case.config.clone())?;
        let fresh = enumerate_expectations(&config)?;
        if !same_result(&fresh, &case.result) {
            bad.push(case.name.clone());
        }
    }
    let expected: Vec<String> = golden_configs().into_iter().map(|(n, _)| n).collect();
    let stored_names: Vec<&String> = stored.cases.iter().map(|c| &c.name).collect();
    for name in expected {
        if !stored_names.contains(&&name) {
            bad.push(format!("{name} (missing)"));
        }
    }
    Ok(bad)
}

fn same_result(a: &ExactResult, b: &ExactResult) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
    let all = |x: &[f64], y: &[f64]| x.len() == y.len() && x.iter().zip(y).all(|(p, q)| close(*p, *q));
    a.precision == b.precision
        && a.profile_count == b.profile_count
        && a.exact == b.exact
        && close(a.probability_mass, b.probability_mass)
        && all(&a.expected_man_rank_by_tier, &b.expected_man_rank_by_tier)
        && all(&a.expected_woman_rank_by_tier, &b.expected_woman_rank_by_tier)
        && close(a.expected_man_rank, b.expected_man_rank)
        && close(a.expected_woman_rank, b.expected_woman_rank)
        && a.match_type_prob.len() == b.match_type_prob.len()
        && a.match_type_prob.iter().zip(&b.match_type_prob).all(|(x, y)| all(x, y))
        && close(a.expected_total_proposals, b.expected_total_proposals)
}
