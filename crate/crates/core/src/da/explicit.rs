use super::{MatchingOutcome, RawRun, NONE};
use crate::error::{Error, Result};
use crate::market::{ClockProfile, MarketConfig, PreferenceProfile, Side, TierLayout};

/// Deferred acceptance over abstract preferences.
///
/// `next(p)` yields proposer `p`'s next list entry, `prefers(r, a, b)` is
/// true when receiver `r` strictly prefers `a` to `b`. Unmatched proposers
/// are kept on a stack seeded so that `order[0]` proposes first.
fn deferred_acceptance(
    n_receivers: usize,
    proposer_layout: &TierLayout,
    order: &[u32],
    mut next: impl FnMut(usize) -> Option<u32>,
    prefers: impl Fn(usize, u32, u32) -> bool,
) -> RawRun {
    let n_proposers = proposer_layout.len();
    let k = proposer_layout.tier_count();
    let mut partner_of_proposer = vec![NONE; n_proposers];
    let mut partner_of_receiver = vec![NONE; n_receivers];
    let mut proposals_made = vec![0u32; n_proposers];
    let mut received = vec![0u32; n_receivers * k];
    let mut total = 0u64;
    let mut stack: Vec<u32> = order.iter().rev().copied().collect();
    while let Some(p) = stack.pop() {
        let pi = p as usize;
        while let Some(r) = next(pi) {
            let ri = r as usize;
            proposals_made[pi] += 1;
            total += 1;
            received[ri * k + proposer_layout.tier_of(pi)] += 1;
            let current = partner_of_receiver[ri];
            if current == NONE || prefers(ri, p, current) {
                partner_of_receiver[ri] = p;
                partner_of_proposer[pi] = r;
                if current != NONE {
                    partner_of_proposer[current as usize] = NONE;
                    stack.push(current);
                }
                break;
            }
        }
    }
    RawRun {
        partner_of_proposer,
        partner_of_receiver,
        proposals_made,
        received,
        proposer_tiers: k,
        total_proposals: total,
    }
}

fn check_order(order: Option<&[u32]>, n: usize) -> Result<Vec<u32>> {
    match order {
        None => Ok((0..n as u32).collect()),
        Some(o) => {
            let mut seen = vec![false; n];
            if o.len() != n {
                return Err(Error::validation(format!(
                    "proposal order lists {} agents, expected {n}",
                    o.len()
                )));
            }
            for &x in o {
                if x as usize >= n || std::mem::replace(&mut seen[x as usize], true) {
                    return Err(Error::validation("proposal order is not a permutation"));
                }
            }
            Ok(o.to_vec())
        }
    }
}

fn run_on_profile(profile: &PreferenceProfile, side: Side, order: Option<&[u32]>) -> Result<MatchingOutcome> {
    let other = match side {
        Side::Man => Side::Woman,
        Side::Woman => Side::Man,
    };
    let proposer_layout = profile.layout(side);
    let order = check_order(order, proposer_layout.len())?;
    let lists = profile.prefs(side);
    let mut cursor = vec![0usize; lists.len()];
    let raw = deferred_acceptance(
        profile.layout(other).len(),
        proposer_layout,
        &order,
        |p| {
            let next = lists[p].get(cursor[p]).copied();
            cursor[p] += 1;
            next
        },
        |r, a, b| profile.rank_of(other, r, a as usize) < profile.rank_of(other, r, b as usize),
    );
    Ok(raw.into_outcome(
        side,
        proposer_layout,
        profile.layout(other),
        profile.scores(side),
        |p, r| profile.rank_of(side, p, r as usize) + 1,
        |r, p| profile.rank_of(other, r, p as usize) + 1,
    ))
}

/// Man-proposing deferred acceptance over materialized lists.
///
/// `proposal_order` fixes which unmatched man proposes first (`None`: index
/// order). The resulting matching and proposal ledger do not depend on it.
pub fn run_da_explicit(profile: &PreferenceProfile, proposal_order: Option<&[u32]>) -> Result<MatchingOutcome> {
    run_on_profile(profile, Side::Man, proposal_order)
}

/// Woman-proposing deferred acceptance; yields the woman-optimal matching.
pub fn run_woman_proposing_da(profile: &PreferenceProfile) -> Result<MatchingOutcome> {
    run_on_profile(profile, Side::Woman, None)
}

fn run_on_clocks(config: &MarketConfig, clocks: &ClockProfile, side: Side) -> MatchingOutcome {
    let other = match side {
        Side::Man => Side::Woman,
        Side::Woman => Side::Man,
    };
    let proposer_layout = config.layout(side);
    let order: Vec<u32> = (0..proposer_layout.len() as u32).collect();
    let mut cursors = clocks.cursors(side);
    let raw = deferred_acceptance(
        config.layout(other).len(),
        proposer_layout,
        &order,
        |p| cursors[p].next_choice(),
        |r, a, b| {
            let keys = clocks.keys(other, r);
            keys[a as usize] < keys[b as usize]
        },
    );
    let rank_on = |s: Side, a: usize, b: u32| {
        let keys = clocks.keys(s, a);
        let kb = keys[b as usize];
        keys.iter().filter(|&&k| k < kb).count() as u32 + 1
    };
    raw.into_outcome(
        side,
        proposer_layout,
        config.layout(other),
        config.tiers(side).scores(),
        |p, r| rank_on(side, p, r),
        |r, p| rank_on(other, r, p),
    )
}

/// Man-proposing deferred acceptance on a clock profile.
pub fn run_da_on_clocks(config: &MarketConfig, clocks: &ClockProfile) -> MatchingOutcome {
    run_on_clocks(config, clocks, Side::Man)
}

/// Woman-proposing deferred acceptance on a clock profile.
pub fn run_woman_proposing_on_clocks(config: &MarketConfig, clocks: &ClockProfile) -> MatchingOutcome {
    run_on_clocks(config, clocks, Side::Woman)
}
