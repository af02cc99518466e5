//! Tiered market configurations.
//!
//! Each side of a market is split into tiers. A tier has a population share
//! and a public score; agents are drawn into the other side's preference
//! lists with probability proportional to their tier's score. Tier sizes are
//! realized from the shares by largest-remainder rounding, and agents are
//! numbered contiguously tier by tier (tier 0 first).

mod file;
mod profile;
mod sampling;

pub use file::{MarketFile, TierFile};
pub use profile::{generate_profile, ClockProfile, PreferenceProfile};
pub use sampling::{
    race_keys, sample_preference_list, sample_preference_list_sequential,
    sequential_order_probability,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROPORTION_TOLERANCE: f64 = 1e-9;

/// Proportions and public scores of the tiers on one side of the market.
///
/// Scores are rescaled at construction so that the smallest one is at least
/// 1. Preference sampling is invariant under a common rescaling of scores.
#[derive(Debug, Clone, PartialEq)]
pub struct TierConfig {
    proportions: Vec<f64>,
    scores: Vec<f64>,
}

impl TierConfig {
    pub fn new(proportions: Vec<f64>, scores: Vec<f64>) -> Result<Self> {
        if proportions.is_empty() {
            return Err(Error::config("a side needs at least one tier"));
        }
        if proportions.len() != scores.len() {
            return Err(Error::config(format!(
                "{} proportions but {} scores",
                proportions.len(),
                scores.len()
            )));
        }
        if let Some(p) = proportions.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::config(format!("tier proportion {p} is not positive")));
        }
        if let Some(s) = scores.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::config(format!("tier score {s} is not positive")));
        }
        let total: f64 = proportions.iter().sum();
        if (total - 1.0).abs() > PROPORTION_TOLERANCE {
            return Err(Error::config(format!(
                "tier proportions sum to {total}, expected 1"
            )));
        }
        let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        let scores = if min < 1.0 {
            scores.iter().map(|s| s / min).collect()
        } else {
            scores
        };
        Ok(TierConfig {
            proportions,
            scores,
        })
    }

    /// A single tier with score 1.
    pub fn uniform() -> Self {
        TierConfig {
            proportions: vec![1.0],
            scores: vec![1.0],
        }
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn tier_count(&self) -> usize {
        self.scores.len()
    }

    /// `Σ pᵢ sᵢ` (ε·α for women, δ·β for men).
    pub fn weighted_score(&self) -> f64 {
        self.proportions
            .iter()
            .zip(&self.scores)
            .map(|(p, s)| p * s)
            .sum()
    }

    /// `Σ pᵢ / sᵢ` (δ·β⁻¹ for men).
    pub fn weighted_inverse_score(&self) -> f64 {
        self.proportions
            .iter()
            .zip(&self.scores)
            .map(|(p, s)| p / s)
            .sum()
    }

    pub fn min_score(&self) -> f64 {
        self.scores.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_score(&self) -> f64 {
        self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Total share of the tiers holding the minimum score.
    pub fn min_score_proportion(&self) -> f64 {
        let min = self.min_score();
        self.proportions
            .iter()
            .zip(&self.scores)
            .filter(|(_, s)| **s == min)
            .map(|(p, _)| p)
            .sum()
    }

    /// Per-agent draw probability of tier `i` in a side of size `n`:
    /// `sᵢ / (n Σ pₖ sₖ)`.
    pub fn draw_probability(&self, tier: usize, n: usize) -> f64 {
        self.scores[tier] / (n as f64 * self.weighted_score())
    }

    pub fn min_draw_probability(&self, n: usize) -> f64 {
        self.min_score() / (n as f64 * self.weighted_score())
    }

    pub fn max_draw_probability(&self, n: usize) -> f64 {
        self.max_score() / (n as f64 * self.weighted_score())
    }

    /// Same tiers with every score multiplied by `factor` (renormalized if
    /// this pushes the minimum below 1).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        TierConfig::new(
            self.proportions.clone(),
            self.scores.iter().map(|s| s * factor).collect(),
        )
    }
}

/// Split `n` agents into tiers by largest-remainder rounding.
///
/// Each tier first gets `⌊pᵢ n⌋` agents; the leftover agents go one each to
/// the tiers with the largest fractional parts, ties going to the lower tier
/// index. A tier that would end up empty borrows one agent from the largest
/// tier so every tier is populated.
pub fn realize_tier_sizes(proportions: &[f64], n: usize) -> Result<Vec<usize>> {
    if proportions.is_empty() {
        return Err(Error::config("no tiers to size"));
    }
    if n < proportions.len() {
        return Err(Error::config(format!(
            "{n} agents cannot fill {} tiers",
            proportions.len()
        )));
    }
    let mut sizes = Vec::with_capacity(proportions.len());
    let mut fractions = Vec::with_capacity(proportions.len());
    for &p in proportions {
        let exact = p * n as f64;
        let nearest = exact.round();
        // Snap floating-point noise such as 6.999999999 to the integer.
        let exact = if (exact - nearest).abs() < 1e-9 { nearest } else { exact };
        let floor = exact.floor();
        sizes.push(floor as usize);
        fractions.push(exact - floor);
    }
    let assigned: usize = sizes.iter().sum();
    if assigned > n {
        return Err(Error::config("tier proportions exceed 1"));
    }
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    // Stable sort keeps ties in tier order.
    order.sort_by(|&a, &b| fractions[b].total_cmp(&fractions[a]));
    for &tier in order.iter().cycle().take(n - assigned) {
        sizes[tier] += 1;
    }
    while let Some(empty) = sizes.iter().position(|&s| s == 0) {
        let donor = (0..sizes.len())
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .expect("nonempty");
        sizes[donor] -= 1;
        sizes[empty] += 1;
    }
    Ok(sizes)
}

/// Which side of the market an agent is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Man,
    Woman,
}

/// Tier-level address of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentId {
    pub side: Side,
    pub tier_index: usize,
    pub index_within_tier: usize,
}

/// Realized tier sizes for one side with contiguous agent numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct TierLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    tier_of: Vec<u32>,
}

impl TierLayout {
    pub fn from_sizes(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut tier_of = Vec::with_capacity(sizes.iter().sum());
        let mut acc = 0;
        for (tier, &size) in sizes.iter().enumerate() {
            offsets.push(acc);
            acc += size;
            tier_of.extend(std::iter::repeat_n(tier as u32, size));
        }
        offsets.push(acc);
        TierLayout {
            sizes,
            offsets,
            tier_of,
        }
    }

    pub fn single(n: usize) -> Self {
        Self::from_sizes(vec![n])
    }

    pub fn len(&self) -> usize {
        self.tier_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tier_of.is_empty()
    }

    pub fn tier_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, tier: usize) -> usize {
        self.sizes[tier]
    }

    /// Index range of the agents in `tier`.
    pub fn range(&self, tier: usize) -> std::ops::Range<usize> {
        self.offsets[tier]..self.offsets[tier + 1]
    }

    #[inline]
    pub fn tier_of(&self, agent: usize) -> usize {
        self.tier_of[agent] as usize
    }

    pub fn agent_id(&self, side: Side, agent: usize) -> AgentId {
        let tier = self.tier_of(agent);
        AgentId {
            side,
            tier_index: tier,
            index_within_tier: agent - self.offsets[tier],
        }
    }

    pub fn index_of(&self, id: AgentId) -> Result<usize> {
        if id.tier_index >= self.sizes.len() || id.index_within_tier >= self.sizes[id.tier_index] {
            return Err(Error::validation(format!("agent {id:?} is outside the layout")));
        }
        Ok(self.offsets[id.tier_index] + id.index_within_tier)
    }
}

/// A complete market instance: side sizes, both tier structures, and the
/// realized tier sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketConfig {
    n_men: usize,
    n_women: usize,
    men: TierConfig,
    women: TierConfig,
    men_layout: TierLayout,
    women_layout: TierLayout,
    allow_unbalanced: bool,
    seed: Option<u64>,
}

impl MarketConfig {
    /// A balanced market with `n` agents per side.
    pub fn balanced(n: usize, men: TierConfig, women: TierConfig) -> Result<Self> {
        Self::build(n, n, men, women, false, None)
    }

    /// A market whose sides may differ in size.
    pub fn unbalanced(n_men: usize, n_women: usize, men: TierConfig, women: TierConfig) -> Result<Self> {
        Self::build(n_men, n_women, men, women, true, None)
    }

    /// Uniform scores on both sides.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::balanced(n, TierConfig::uniform(), TierConfig::uniform())
    }

    pub fn build(
        n_men: usize,
        n_women: usize,
        men: TierConfig,
        women: TierConfig,
        allow_unbalanced: bool,
        seed: Option<u64>,
    ) -> Result<Self> {
        if n_men == 0 || n_women == 0 {
            return Err(Error::config("both sides need at least one agent"));
        }
        if n_men != n_women && !allow_unbalanced {
            return Err(Error::config(format!(
                "n_men = {n_men} differs from n_women = {n_women}; set allow_unbalanced to permit this"
            )));
        }
        if n_men > u32::MAX as usize / 2 || n_women > u32::MAX as usize / 2 {
            return Err(Error::config("market too large for 32-bit agent indices"));
        }
        let men_layout = TierLayout::from_sizes(realize_tier_sizes(men.proportions(), n_men)?);
        let women_layout = TierLayout::from_sizes(realize_tier_sizes(women.proportions(), n_women)?);
        Ok(MarketConfig {
            n_men,
            n_women,
            men,
            women,
            men_layout,
            women_layout,
            allow_unbalanced,
            seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n_men(&self) -> usize {
        self.n_men
    }

    pub fn n_women(&self) -> usize {
        self.n_women
    }

    pub fn is_balanced(&self) -> bool {
        self.n_men == self.n_women
    }

    pub fn allows_unbalanced(&self) -> bool {
        self.allow_unbalanced
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn men(&self) -> &TierConfig {
        &self.men
    }

    pub fn women(&self) -> &TierConfig {
        &self.women
    }

    pub fn men_layout(&self) -> &TierLayout {
        &self.men_layout
    }

    pub fn women_layout(&self) -> &TierLayout {
        &self.women_layout
    }

    pub fn layout(&self, side: Side) -> &TierLayout {
        match side {
            Side::Man => &self.men_layout,
            Side::Woman => &self.women_layout,
        }
    }

    pub fn tiers(&self, side: Side) -> &TierConfig {
        match side {
            Side::Man => &self.men,
            Side::Woman => &self.women,
        }
    }

    /// Score of man `m` (β of his tier).
    #[inline]
    pub fn man_score(&self, m: usize) -> f64 {
        self.men.scores[self.men_layout.tier_of(m)]
    }

    #[inline]
    pub fn woman_score(&self, w: usize) -> f64 {
        self.women.scores[self.women_layout.tier_of(w)]
    }

    /// Per-agent sampling weights of one side, in agent order.
    pub fn weights(&self, side: Side) -> Vec<f64> {
        let (tiers, layout) = (self.tiers(side), self.layout(side));
        (0..layout.len()).map(|a| tiers.scores[layout.tier_of(a)]).collect()
    }

    /// The same market with the sides swapped (women become the proposers).
    pub fn transposed(&self) -> MarketConfig {
        MarketConfig {
            n_men: self.n_women,
            n_women: self.n_men,
            men: self.women.clone(),
            women: self.men.clone(),
            men_layout: self.women_layout.clone(),
            women_layout: self.men_layout.clone(),
            allow_unbalanced: self.allow_unbalanced,
            seed: self.seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MarketFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MarketFile::from(self)).expect("plain data serializes")
    }
}
