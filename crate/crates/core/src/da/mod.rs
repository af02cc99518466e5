//! Deferred acceptance engines.
//!
//! * [`run_da_explicit`] / [`run_woman_proposing_da`] run over materialized
//!   preference lists;
//! * [`run_da_lazy`] samples men's lists on demand and gives each woman an
//!   exponential clock per proposal, never building a profile;
//! * [`run_da_with_reproposals`] lets men draw with replacement and counts
//!   every draw;
//! * [`run_da_excluding`] / [`resume_da`] stop and restart the lazy engine
//!   around a held-out set of men.

mod explicit;
mod lazy;
mod smoothness;
mod stability;

pub use explicit::{
    run_da_explicit, run_da_on_clocks, run_woman_proposing_da, run_woman_proposing_on_clocks,
};
pub use lazy::{
    resume_da, run_da_excluding, run_da_lazy, run_da_lazy_with, run_da_with_reproposals,
    EngineOptions, LazyRun, PartialMatchingState, DEFAULT_BINOMIAL_RANK_THRESHOLD,
};
pub use smoothness::{smoothness_diagnostics, ProposalLedger, SmoothnessConstants, SmoothnessReport};
pub use stability::check_stability;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{Side, TierLayout};

pub(crate) const NONE: u32 = u32::MAX;

/// A one-to-one partial matching between men and women.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    wife_of: Vec<Option<u32>>,
    husband_of: Vec<Option<u32>>,
}

impl Matching {
    /// Checks that the two directions describe the same bijection.
    pub fn new(wife_of: Vec<Option<u32>>, husband_of: Vec<Option<u32>>) -> Result<Self> {
        for (m, w) in wife_of.iter().enumerate() {
            if let Some(w) = *w {
                if husband_of.get(w as usize).copied().flatten() != Some(m as u32) {
                    return Err(Error::validation(format!(
                        "man {m} holds woman {w} but she does not hold him"
                    )));
                }
            }
        }
        for (w, m) in husband_of.iter().enumerate() {
            if let Some(m) = *m {
                if wife_of.get(m as usize).copied().flatten() != Some(w as u32) {
                    return Err(Error::validation(format!(
                        "woman {w} holds man {m} but he does not hold her"
                    )));
                }
            }
        }
        Ok(Matching {
            wife_of,
            husband_of,
        })
    }

    /// Build from a list of pairs.
    pub fn from_pairs(n_men: usize, n_women: usize, pairs: &[(u32, u32)]) -> Result<Self> {
        let mut wife_of = vec![None; n_men];
        let mut husband_of = vec![None; n_women];
        for &(m, w) in pairs {
            let (mi, wi) = (m as usize, w as usize);
            if mi >= n_men || wi >= n_women {
                return Err(Error::validation(format!("pair ({m}, {w}) out of range")));
            }
            if wife_of[mi].is_some() || husband_of[wi].is_some() {
                return Err(Error::validation(format!("pair ({m}, {w}) reuses an agent")));
            }
            wife_of[mi] = Some(w);
            husband_of[wi] = Some(m);
        }
        Ok(Matching {
            wife_of,
            husband_of,
        })
    }

    pub(crate) fn from_raw(wife: &[u32], husband: &[u32]) -> Self {
        let lift = |v: &[u32]| v.iter().map(|&x| (x != NONE).then_some(x)).collect();
        Matching {
            wife_of: lift(wife),
            husband_of: lift(husband),
        }
    }

    pub fn n_men(&self) -> usize {
        self.wife_of.len()
    }

    pub fn n_women(&self) -> usize {
        self.husband_of.len()
    }

    pub fn wife_of(&self, m: usize) -> Option<u32> {
        self.wife_of[m]
    }

    pub fn husband_of(&self, w: usize) -> Option<u32> {
        self.husband_of[w]
    }

    pub fn wives(&self) -> &[Option<u32>] {
        &self.wife_of
    }

    pub fn husbands(&self) -> &[Option<u32>] {
        &self.husband_of
    }

    /// Matched pairs in man order.
    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.wife_of
            .iter()
            .enumerate()
            .filter_map(|(m, w)| w.map(|w| (m as u32, w)))
            .collect()
    }

    pub fn matched_count(&self) -> usize {
        self.wife_of.iter().flatten().count()
    }

    /// Swap the roles of the two sides.
    pub fn transposed(&self) -> Matching {
        Matching {
            wife_of: self.husband_of.clone(),
            husband_of: self.wife_of.clone(),
        }
    }
}

/// Result of one deferred acceptance run.
///
/// The proposal ledger is recorded from the receivers' point of view:
/// `received_by_tier(r)` counts, per proposer tier, the distinct proposals
/// receiver `r` saw, and `gamma(r)` is the sum of those proposers' scores.
/// In man-proposing runs the receivers are the women.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingOutcome {
    pub proposing_side: Side,
    pub matching: Matching,
    /// 1-based rank of each man's wife on his list; `None` if unmatched.
    pub man_rank: Vec<Option<u32>>,
    /// 1-based rank of each woman's husband on her list.
    pub woman_rank: Vec<Option<u32>>,
    /// Distinct proposals made by each proposer.
    pub proposals_made: Vec<u32>,
    pub total_proposals: u64,
    pub max_proposals_by_any_proposer: u32,
    pub(crate) received: Vec<u32>,
    pub(crate) gamma: Vec<f64>,
    pub(crate) proposer_tiers: usize,
    pub(crate) men_tier_sizes: Vec<usize>,
    pub(crate) women_tier_sizes: Vec<usize>,
}

/// Per-tier summary of one side's ranks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TierRankSummary {
    pub side: Side,
    pub tier: usize,
    /// Mean rank over the tier's matched agents (`NaN` if none matched).
    pub mean_rank: f64,
    pub count: usize,
    pub matched: usize,
}

impl MatchingOutcome {
    pub fn received_by_tier(&self, receiver: usize) -> &[u32] {
        &self.received[receiver * self.proposer_tiers..(receiver + 1) * self.proposer_tiers]
    }

    pub fn gamma(&self, receiver: usize) -> f64 {
        self.gamma[receiver]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gamma
    }

    pub fn proposer_tier_count(&self) -> usize {
        self.proposer_tiers
    }

    pub fn layout(&self, side: Side) -> TierLayout {
        TierLayout::from_sizes(match side {
            Side::Man => self.men_tier_sizes.clone(),
            Side::Woman => self.women_tier_sizes.clone(),
        })
    }

    pub fn ranks(&self, side: Side) -> &[Option<u32>] {
        match side {
            Side::Man => &self.man_rank,
            Side::Woman => &self.woman_rank,
        }
    }

    /// Mean rank over all matched agents of a side.
    pub fn mean_rank(&self, side: Side) -> f64 {
        let (sum, count) = self
            .ranks(side)
            .iter()
            .flatten()
            .fold((0u64, 0usize), |(s, c), &r| (s + r as u64, c + 1));
        sum as f64 / count as f64
    }

    pub fn tier_summaries(&self, side: Side) -> Vec<TierRankSummary> {
        let layout = self.layout(side);
        let ranks = self.ranks(side);
        (0..layout.tier_count())
            .map(|tier| {
                let (sum, matched) = ranks[layout.range(tier)]
                    .iter()
                    .flatten()
                    .fold((0u64, 0usize), |(s, c), &r| (s + r as u64, c + 1));
                TierRankSummary {
                    side,
                    tier,
                    mean_rank: sum as f64 / matched as f64,
                    count: layout.size(tier),
                    matched,
                }
            })
            .collect()
    }

    /// `m[i][j]`: fraction of matched tier-`i` women whose husband is in
    /// men's tier `j`.
    pub fn match_type_matrix(&self) -> Vec<Vec<f64>> {
        self.tier_pair_fractions(Side::Woman)
    }

    /// `m[j][i]`: fraction of matched tier-`j` men whose wife is in women's
    /// tier `i`.
    pub fn men_match_type_matrix(&self) -> Vec<Vec<f64>> {
        self.tier_pair_fractions(Side::Man)
    }

    fn tier_pair_fractions(&self, row_side: Side) -> Vec<Vec<f64>> {
        let (rows, cols) = match row_side {
            Side::Man => (self.layout(Side::Man), self.layout(Side::Woman)),
            Side::Woman => (self.layout(Side::Woman), self.layout(Side::Man)),
        };
        let partners = match row_side {
            Side::Man => self.matching.wives(),
            Side::Woman => self.matching.husbands(),
        };
        let mut counts = vec![vec![0usize; cols.tier_count()]; rows.tier_count()];
        for (a, p) in partners.iter().enumerate() {
            if let Some(p) = p {
                counts[rows.tier_of(a)][cols.tier_of(*p as usize)] += 1;
            }
        }
        counts
            .into_iter()
            .map(|row| {
                let total: usize = row.iter().sum();
                row.iter().map(|&c| c as f64 / total as f64).collect()
            })
            .collect()
    }

    /// Per-agent arrays as JSON.
    pub fn to_json_value(&self) -> serde_json::Value {
        let received: Vec<&[u32]> = (0..self.gamma.len()).map(|r| self.received_by_tier(r)).collect();
        serde_json::json!({
            "proposing_side": self.proposing_side,
            "n_men": self.matching.n_men(),
            "n_women": self.matching.n_women(),
            "men_tier_sizes": self.men_tier_sizes,
            "women_tier_sizes": self.women_tier_sizes,
            "wife_of": self.matching.wives(),
            "husband_of": self.matching.husbands(),
            "man_rank": self.man_rank,
            "woman_rank": self.woman_rank,
            "proposals_made": self.proposals_made,
            "total_proposals": self.total_proposals,
            "max_proposals_by_any_proposer": self.max_proposals_by_any_proposer,
            "received_by_tier": received,
            "gamma": self.gamma,
        })
    }

    /// Compact summary: one row per tier per side.
    pub fn write_summary_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tier", "side", "mean_rank", "count"])?;
        for side in [Side::Man, Side::Woman] {
            for s in self.tier_summaries(side) {
                let name = match side {
                    Side::Man => "man",
                    Side::Woman => "woman",
                };
                w.write_record([
                    s.tier.to_string(),
                    name.to_string(),
                    s.mean_rank.to_string(),
                    s.count.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Raw result of a deferred acceptance run, expressed in proposer/receiver
/// terms, before being oriented into a [`MatchingOutcome`].
pub(crate) struct RawRun {
    pub partner_of_proposer: Vec<u32>,
    pub partner_of_receiver: Vec<u32>,
    pub proposals_made: Vec<u32>,
    pub received: Vec<u32>,
    pub proposer_tiers: usize,
    pub total_proposals: u64,
}

impl RawRun {
    /// Orient the raw run. `proposer_rank` / `receiver_rank` give the
    /// 1-based rank of the partner for a matched agent.
    pub(crate) fn into_outcome(
        self,
        proposing_side: Side,
        proposer_layout: &TierLayout,
        receiver_layout: &TierLayout,
        proposer_scores: &[f64],
        proposer_rank: impl Fn(usize, u32) -> u32,
        mut receiver_rank: impl FnMut(usize, u32) -> u32,
    ) -> MatchingOutcome {
        let k = self.proposer_tiers;
        let gamma: Vec<f64> = self
            .received
            .chunks_exact(k)
            .map(|row| row.iter().zip(proposer_scores).map(|(&c, &s)| c as f64 * s).sum())
            .collect();
        let proposer_ranks: Vec<Option<u32>> = self
            .partner_of_proposer
            .iter()
            .enumerate()
            .map(|(p, &r)| (r != NONE).then(|| proposer_rank(p, r)))
            .collect();
        let receiver_ranks: Vec<Option<u32>> = self
            .partner_of_receiver
            .iter()
            .enumerate()
            .map(|(r, &p)| (p != NONE).then(|| receiver_rank(r, p)))
            .collect();
        let max = self.proposals_made.iter().copied().max().unwrap_or(0);
        let proposer_sizes = proposer_layout.sizes().to_vec();
        let receiver_sizes = receiver_layout.sizes().to_vec();
        let (matching, man_rank, woman_rank, men_sizes, women_sizes) = match proposing_side {
            Side::Man => (
                Matching::from_raw(&self.partner_of_proposer, &self.partner_of_receiver),
                proposer_ranks,
                receiver_ranks,
                proposer_sizes,
                receiver_sizes,
            ),
            Side::Woman => (
                Matching::from_raw(&self.partner_of_receiver, &self.partner_of_proposer),
                receiver_ranks,
                proposer_ranks,
                receiver_sizes,
                proposer_sizes,
            ),
        };
        MatchingOutcome {
            proposing_side,
            matching,
            man_rank,
            woman_rank,
            proposals_made: self.proposals_made,
            total_proposals: self.total_proposals,
            max_proposals_by_any_proposer: max,
            received: self.received,
            gamma,
            proposer_tiers: k,
            men_tier_sizes: men_sizes,
            women_tier_sizes: women_sizes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_validation() {
        assert!(Matching::new(vec![Some(0), None], vec![Some(0), None]).is_ok());
        assert!(Matching::new(vec![Some(0), Some(0)], vec![Some(0), None]).is_err());
        assert!(Matching::new(vec![Some(1), None], vec![Some(0), None]).is_err());
        assert!(Matching::from_pairs(2, 2, &[(0, 1), (1, 1)]).is_err());
        let m = Matching::from_pairs(2, 3, &[(0, 2), (1, 0)]).unwrap();
        assert_eq!(m.husband_of(2), Some(0));
        assert_eq!(m.husband_of(1), None);
        assert_eq!(m.pairs(), vec![(0, 2), (1, 0)]);
        assert_eq!(m.transposed().wife_of(2), Some(0));
    }
}
