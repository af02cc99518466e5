//! Deferred acceptance without materialized preferences.
//!
//! A man's list is revealed one entry at a time by drawing women from the
//! score-weighted distribution and discarding women he already proposed
//! to. A woman keeps only her current husband and his clock: every proposal
//! from a man with score `β` draws a fresh `Exp(β)` clock and wins iff it
//! is below her current minimum. By memorylessness this accepts with
//! probability `β / (β + Γ)`, `Γ` being the total score of earlier
//! proposers, which is exactly the law of her sampled preference list.
//!
//! Women's ranks are filled in after the run: the clocks of the men who
//! never proposed to her are independent of everything observed, so her
//! husband's rank is one plus the number of those clocks below his.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};

use super::{MatchingOutcome, RawRun, NONE};
use crate::error::{Error, Result};
use crate::market::{race_keys, MarketConfig, PreferenceProfile, Side};

/// Side size from which the women's rank pass switches from one Bernoulli
/// trial per non-proposer to one binomial draw per tier.
pub const DEFAULT_BINOMIAL_RANK_THRESHOLD: usize = 1 << 15;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    /// Use the binomial rank shortcut when `n_men >= binomial_rank_threshold`.
    pub binomial_rank_threshold: usize,
    /// Reconstruct the full realized preference profile (small markets only).
    pub record_profile: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            binomial_rank_threshold: DEFAULT_BINOMIAL_RANK_THRESHOLD,
            record_profile: false,
        }
    }
}

/// Output of [`run_da_lazy_with`].
#[derive(Debug, Clone)]
pub struct LazyRun {
    pub outcome: MatchingOutcome,
    /// Number of women drawn, rejected repeats included.
    pub draws: u64,
    /// Realized preferences, when requested.
    pub profile: Option<PreferenceProfile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Switch to exact renormalized sampling once a man has proposed to
    /// more than half of the women.
    Lazy,
    /// Always draw with replacement; repeats are counted and ignored.
    Reproposals,
}

#[derive(Debug, Clone)]
struct WomanSampler {
    cumulative: Vec<f64>,
    starts: Vec<usize>,
    sizes: Vec<usize>,
    scores: Vec<f64>,
    total: f64,
}

impl WomanSampler {
    fn new(config: &MarketConfig) -> Self {
        let layout = config.women_layout();
        let scores = config.women().scores().to_vec();
        let mut acc = 0.0;
        let cumulative = (0..layout.tier_count())
            .map(|t| {
                acc += layout.size(t) as f64 * scores[t];
                acc
            })
            .collect();
        WomanSampler {
            cumulative,
            starts: (0..layout.tier_count()).map(|t| layout.range(t).start).collect(),
            sizes: layout.sizes().to_vec(),
            scores,
            total: acc,
        }
    }

    /// One draw from the score-weighted distribution, using a single
    /// uniform for both the tier and the position inside it.
    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = rng.random::<f64>() * self.total;
        let last = self.cumulative.len() - 1;
        let mut t = 0;
        while t < last && u >= self.cumulative[t] {
            t += 1;
        }
        let base = if t == 0 { 0.0 } else { self.cumulative[t - 1] };
        let idx = (((u - base) / self.scores[t]) as usize).min(self.sizes[t] - 1);
        (self.starts[t] + idx) as u32
    }
}

/// Ledger of a lazy run paused with some men held out.
#[derive(Debug, Clone)]
pub struct PartialMatchingState {
    config: MarketConfig,
    mode: Mode,
    excluded: Vec<u32>,
    wife: Vec<u32>,
    husband: Vec<u32>,
    husband_clock: Vec<f64>,
    /// Women each man proposed to, in proposal order.
    proposed: Vec<Vec<u32>>,
    received: Vec<u32>,
    total_proposals: u64,
    draws: u64,
    recorded_clocks: Option<Vec<Vec<(u32, f64)>>>,
    sampler: WomanSampler,
}

impl PartialMatchingState {
    fn new(config: &MarketConfig, mode: Mode, record: bool) -> Self {
        let (nm, nw) = (config.n_men(), config.n_women());
        PartialMatchingState {
            config: config.clone(),
            mode,
            excluded: Vec::new(),
            wife: vec![NONE; nm],
            husband: vec![NONE; nw],
            husband_clock: vec![f64::INFINITY; nw],
            proposed: vec![Vec::new(); nm],
            received: vec![0; nw * config.men().tier_count()],
            total_proposals: 0,
            draws: 0,
            recorded_clocks: record.then(|| vec![Vec::new(); nw]),
            sampler: WomanSampler::new(config),
        }
    }

    pub fn config(&self) -> &MarketConfig {
        &self.config
    }

    pub fn excluded_men(&self) -> &[u32] {
        &self.excluded
    }

    pub fn total_proposals(&self) -> u64 {
        self.total_proposals
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn wife_of(&self, m: usize) -> Option<u32> {
        let w = self.wife[m];
        (w != NONE).then_some(w)
    }

    pub fn husband_of(&self, w: usize) -> Option<u32> {
        let m = self.husband[w];
        (m != NONE).then_some(m)
    }

    /// Women man `m` has proposed to, in order.
    pub fn proposals_of(&self, m: usize) -> &[u32] {
        &self.proposed[m]
    }

    /// Per men-tier counts of proposals woman `w` received.
    pub fn received_by_tier(&self, w: usize) -> &[u32] {
        let k = self.config.men().tier_count();
        &self.received[w * k..(w + 1) * k]
    }

    fn draw_new_woman<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R) -> u32 {
        let n_women = self.config.n_women();
        if self.mode == Mode::Lazy && self.proposed[m].len() * 2 > n_women {
            self.draws += 1;
            return self.draw_from_remaining(m, rng);
        }
        loop {
            let w = self.sampler.sample(rng);
            self.draws += 1;
            if !self.proposed[m].contains(&w) {
                return w;
            }
        }
    }

    fn draw_from_remaining<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> u32 {
        let n = self.config.n_women();
        let mut taken = vec![false; n];
        for &w in &self.proposed[m] {
            taken[w as usize] = true;
        }
        let total: f64 = (0..n).filter(|&w| !taken[w]).map(|w| self.config.woman_score(w)).sum();
        let mut target = rng.random::<f64>() * total;
        let mut last = NONE;
        for w in (0..n).filter(|&w| !taken[w]) {
            last = w as u32;
            target -= self.config.woman_score(w);
            if target < 0.0 {
                break;
            }
        }
        last
    }

    /// Let man `m` propose until he is held or has exhausted his list.
    fn settle<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R, stack: &mut Vec<u32>) {
        let beta = self.config.man_score(m);
        let tier = self.config.men_layout().tier_of(m);
        let k = self.config.men().tier_count();
        while self.proposed[m].len() < self.config.n_women() {
            let w = self.draw_new_woman(m, rng);
            let wi = w as usize;
            self.proposed[m].push(w);
            self.total_proposals += 1;
            self.received[wi * k + tier] += 1;
            let clock = rng.sample::<f64, _>(Exp1) / beta;
            if let Some(rec) = self.recorded_clocks.as_mut() {
                rec[wi].push((m as u32, clock));
            }
            if clock < self.husband_clock[wi] {
                let previous = self.husband[wi];
                self.husband[wi] = m as u32;
                self.husband_clock[wi] = clock;
                self.wife[m] = w;
                if previous != NONE {
                    self.wife[previous as usize] = NONE;
                    stack.push(previous);
                }
                return;
            }
        }
    }

    fn run<R: Rng + ?Sized>(&mut self, men: impl DoubleEndedIterator<Item = u32>, rng: &mut R) {
        let mut stack: Vec<u32> = men.rev().collect();
        while let Some(m) = stack.pop() {
            self.settle(m as usize, rng, &mut stack);
        }
    }

    fn finish<R: Rng + ?Sized>(self, options: &EngineOptions, rng: &mut R) -> LazyRun {
        let config = &self.config;
        let (nm, nw) = (config.n_men(), config.n_women());
        let men_layout = config.men_layout();
        let betas = config.men().scores();
        let k = betas.len();

        let mut woman_rank = vec![0u32; nw];
        let mut profile = None;
        if let Some(recorded) = &self.recorded_clocks {
            let women_prefs = (0..nw)
                .map(|w| {
                    let mut clocks: Vec<f64> = (0..nm)
                        .map(|m| rng.sample::<f64, _>(Exp1) / config.man_score(m))
                        .collect();
                    for &(m, c) in &recorded[w] {
                        clocks[m as usize] = c;
                    }
                    if self.husband[w] != NONE {
                        let c = self.husband_clock[w];
                        woman_rank[w] = clocks.iter().filter(|&&x| x < c).count() as u32 + 1;
                    }
                    let mut order: Vec<u32> = (0..nm as u32).collect();
                    order.sort_unstable_by(|&a, &b| clocks[a as usize].total_cmp(&clocks[b as usize]));
                    order
                })
                .collect();
            let weights = config.weights(Side::Woman);
            let men_prefs = (0..nm)
                .map(|m| {
                    let mut list = self.proposed[m].clone();
                    let mut rest: Vec<u32> = {
                        let mut taken = vec![false; nw];
                        list.iter().for_each(|&w| taken[w as usize] = true);
                        (0..nw as u32).filter(|&w| !taken[w as usize]).collect()
                    };
                    let rest_weights: Vec<f64> = rest.iter().map(|&w| weights[w as usize]).collect();
                    let keys = race_keys(&rest_weights, rng);
                    let mut idx: Vec<usize> = (0..rest.len()).collect();
                    idx.sort_unstable_by(|&a, &b| keys[a].total_cmp(&keys[b]));
                    list.extend(idx.iter().map(|&i| rest[i]));
                    rest.clear();
                    list
                })
                .collect();
            profile = Some(
                PreferenceProfile::for_market(men_prefs, women_prefs, config)
                    .expect("reconstructed lists are permutations"),
            );
        } else {
            let binomial = nm >= options.binomial_rank_threshold;
            #[allow(clippy::needless_range_loop)]
            for w in 0..nw {
                if self.husband[w] == NONE {
                    continue;
                }
                let c = self.husband_clock[w];
                let mut below = 0u64;
                for (j, &beta) in betas.iter().enumerate() {
                    let silent = (men_layout.size(j) as u64).saturating_sub(self.received[w * k + j] as u64);
                    if silent == 0 {
                        continue;
                    }
                    // P(Exp(β) < c)
                    let p = -(-beta * c).exp_m1();
                    if binomial {
                        below += Binomial::new(silent, p).expect("valid p").sample(rng);
                    } else {
                        for _ in 0..silent {
                            if rng.random::<f64>() < p {
                                below += 1;
                            }
                        }
                    }
                }
                woman_rank[w] = below as u32 + 1;
            }
        }

        let draws = self.draws;
        let proposals_made: Vec<u32> = self.proposed.iter().map(|p| p.len() as u32).collect();
        let raw = RawRun {
            partner_of_proposer: self.wife,
            partner_of_receiver: self.husband,
            proposals_made,
            received: self.received,
            proposer_tiers: k,
            total_proposals: self.total_proposals,
        };
        let made = raw.proposals_made.clone();
        let outcome = raw.into_outcome(
            Side::Man,
            config.men_layout(),
            config.women_layout(),
            betas,
            |m, _| made[m],
            |w, _| woman_rank[w],
        );
        LazyRun {
            outcome,
            draws,
            profile,
        }
    }
}

/// Man-proposing deferred acceptance with lazily sampled preferences.
pub fn run_da_lazy<R: Rng + ?Sized>(config: &MarketConfig, rng: &mut R) -> MatchingOutcome {
    run_da_lazy_with(config, &EngineOptions::default(), rng).outcome
}

pub fn run_da_lazy_with<R: Rng + ?Sized>(config: &MarketConfig, options: &EngineOptions, rng: &mut R) -> LazyRun {
    let mut state = PartialMatchingState::new(config, Mode::Lazy, options.record_profile);
    state.run(0..config.n_men() as u32, rng);
    state.finish(options, rng)
}

/// Deferred acceptance where men draw women with replacement.
///
/// Returns the outcome together with the number of draws, repeats
/// included; in a balanced market that count is a coupon-collector time
/// for the women's score distribution.
pub fn run_da_with_reproposals<R: Rng + ?Sized>(
    config: &MarketConfig,
    rng: &mut R,
) -> Result<(MatchingOutcome, u64)> {
    if !config.is_balanced() {
        return Err(Error::config("re-proposal runs need a balanced market"));
    }
    let mut state = PartialMatchingState::new(config, Mode::Reproposals, false);
    state.run(0..config.n_men() as u32, rng);
    let run = state.finish(&EngineOptions::default(), rng);
    Ok((run.outcome, run.draws))
}

/// Run the lazy engine with the men in `excluded` held out.
pub fn run_da_excluding<R: Rng + ?Sized>(
    config: &MarketConfig,
    excluded: &[u32],
    rng: &mut R,
) -> Result<PartialMatchingState> {
    let mut held = vec![false; config.n_men()];
    for &m in excluded {
        let slot = held
            .get_mut(m as usize)
            .ok_or_else(|| Error::validation(format!("man {m} is not in the market")))?;
        if std::mem::replace(slot, true) {
            return Err(Error::validation(format!("man {m} excluded twice")));
        }
    }
    let mut state = PartialMatchingState::new(config, Mode::Lazy, false);
    state.excluded = excluded.to_vec();
    let active: Vec<u32> = (0..config.n_men() as u32).filter(|&m| !held[m as usize]).collect();
    state.run(active.into_iter(), rng);
    Ok(state)
}

/// Let the held-out men propose and finish the run.
pub fn resume_da<R: Rng + ?Sized>(mut state: PartialMatchingState, rng: &mut R) -> MatchingOutcome {
    let excluded = std::mem::take(&mut state.excluded);
    state.run(excluded.into_iter(), rng);
    state.finish(&EngineOptions::default(), rng).outcome
}
