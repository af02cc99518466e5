use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use super::sampling::{race_keys, sample_preference_list};
use super::{MarketConfig, Side, TierLayout};
use crate::error::{Error, Result};

/// Complete strict preference lists for both sides.
///
/// Agents are referred to by their index within their side; the tier
/// layouts and scores carried alongside map indices to tiers. Rank tables
/// (position of each agent on each list) are built at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceProfile {
    men_prefs: Vec<Vec<u32>>,
    women_prefs: Vec<Vec<u32>>,
    men_rank: Vec<u32>,
    women_rank: Vec<u32>,
    men_layout: TierLayout,
    women_layout: TierLayout,
    men_scores: Vec<f64>,
    women_scores: Vec<f64>,
}

fn rank_table(prefs: &[Vec<u32>], other: usize, side: &str) -> Result<Vec<u32>> {
    let mut table = vec![u32::MAX; prefs.len() * other];
    for (agent, list) in prefs.iter().enumerate() {
        if list.len() != other {
            return Err(Error::validation(format!(
                "{side} {agent} ranks {} agents, expected {other}",
                list.len()
            )));
        }
        let row = &mut table[agent * other..(agent + 1) * other];
        for (pos, &x) in list.iter().enumerate() {
            let x = x as usize;
            if x >= other || row[x] != u32::MAX {
                return Err(Error::validation(format!(
                    "{side} {agent}'s list is not a permutation"
                )));
            }
            row[x] = pos as u32;
        }
    }
    Ok(table)
}

impl PreferenceProfile {
    /// Profile with a single score-1 tier on each side.
    pub fn new(men_prefs: Vec<Vec<u32>>, women_prefs: Vec<Vec<u32>>) -> Result<Self> {
        let (nm, nw) = (men_prefs.len(), women_prefs.len());
        Self::with_layouts(
            men_prefs,
            women_prefs,
            TierLayout::single(nm),
            vec![1.0],
            TierLayout::single(nw),
            vec![1.0],
        )
    }

    /// Profile whose agents carry the tiers of `config`.
    pub fn for_market(
        men_prefs: Vec<Vec<u32>>,
        women_prefs: Vec<Vec<u32>>,
        config: &MarketConfig,
    ) -> Result<Self> {
        Self::with_layouts(
            men_prefs,
            women_prefs,
            config.men_layout().clone(),
            config.men().scores().to_vec(),
            config.women_layout().clone(),
            config.women().scores().to_vec(),
        )
    }

    pub fn with_layouts(
        men_prefs: Vec<Vec<u32>>,
        women_prefs: Vec<Vec<u32>>,
        men_layout: TierLayout,
        men_scores: Vec<f64>,
        women_layout: TierLayout,
        women_scores: Vec<f64>,
    ) -> Result<Self> {
        let (nm, nw) = (men_prefs.len(), women_prefs.len());
        if nm == 0 || nw == 0 {
            return Err(Error::validation("profile has an empty side"));
        }
        if men_layout.len() != nm || women_layout.len() != nw {
            return Err(Error::validation("tier layout does not match profile size"));
        }
        if men_layout.tier_count() != men_scores.len() || women_layout.tier_count() != women_scores.len() {
            return Err(Error::validation("one score per tier required"));
        }
        let men_rank = rank_table(&men_prefs, nw, "man")?;
        let women_rank = rank_table(&women_prefs, nm, "woman")?;
        Ok(PreferenceProfile {
            men_prefs,
            women_prefs,
            men_rank,
            women_rank,
            men_layout,
            women_layout,
            men_scores,
            women_scores,
        })
    }

    pub fn n_men(&self) -> usize {
        self.men_prefs.len()
    }

    pub fn n_women(&self) -> usize {
        self.women_prefs.len()
    }

    pub fn men_prefs(&self) -> &[Vec<u32>] {
        &self.men_prefs
    }

    pub fn women_prefs(&self) -> &[Vec<u32>] {
        &self.women_prefs
    }

    pub fn prefs(&self, side: Side) -> &[Vec<u32>] {
        match side {
            Side::Man => &self.men_prefs,
            Side::Woman => &self.women_prefs,
        }
    }

    pub fn layout(&self, side: Side) -> &TierLayout {
        match side {
            Side::Man => &self.men_layout,
            Side::Woman => &self.women_layout,
        }
    }

    pub fn scores(&self, side: Side) -> &[f64] {
        match side {
            Side::Man => &self.men_scores,
            Side::Woman => &self.women_scores,
        }
    }

    /// 0-based position of woman `w` on man `m`'s list.
    #[inline]
    pub fn man_rank_of(&self, m: usize, w: usize) -> u32 {
        self.men_rank[m * self.women_prefs.len() + w]
    }

    /// 0-based position of man `m` on woman `w`'s list.
    #[inline]
    pub fn woman_rank_of(&self, w: usize, m: usize) -> u32 {
        self.women_rank[w * self.men_prefs.len() + m]
    }

    /// Position of `other` on `agent`'s list, `agent` being on `side`.
    #[inline]
    pub fn rank_of(&self, side: Side, agent: usize, other: usize) -> u32 {
        match side {
            Side::Man => self.man_rank_of(agent, other),
            Side::Woman => self.woman_rank_of(agent, other),
        }
    }

    /// The same profile seen with the sides swapped.
    pub fn transposed(&self) -> PreferenceProfile {
        PreferenceProfile {
            men_prefs: self.women_prefs.clone(),
            women_prefs: self.men_prefs.clone(),
            men_rank: self.women_rank.clone(),
            women_rank: self.men_rank.clone(),
            men_layout: self.women_layout.clone(),
            women_layout: self.men_layout.clone(),
            men_scores: self.women_scores.clone(),
            women_scores: self.men_scores.clone(),
        }
    }
}

/// Draw every man's list over women (weighted by the women's scores) and
/// every woman's list over men, independently.
pub fn generate_profile<R: Rng + ?Sized>(config: &MarketConfig, rng: &mut R) -> PreferenceProfile {
    let women_w = config.weights(Side::Woman);
    let men_w = config.weights(Side::Man);
    let men_prefs = (0..config.n_men())
        .map(|_| sample_preference_list(&women_w, rng).expect("validated weights"))
        .collect();
    let women_prefs = (0..config.n_women())
        .map(|_| sample_preference_list(&men_w, rng).expect("validated weights"))
        .collect();
    PreferenceProfile::for_market(men_prefs, women_prefs, config).expect("sampled lists are permutations")
}

/// A profile held as exponential-race clocks instead of sorted lists.
///
/// `key(side, a, b)` is agent `a`'s clock for agent `b` on the other side;
/// `a` prefers smaller clocks. Preference lists are produced lazily, so
/// deferred acceptance touches only the prefixes it needs.
#[derive(Debug, Clone)]
pub struct ClockProfile {
    n_men: usize,
    n_women: usize,
    men_keys: Vec<f64>,
    women_keys: Vec<f64>,
}

impl ClockProfile {
    pub fn generate<R: Rng + ?Sized>(config: &MarketConfig, rng: &mut R) -> Self {
        let women_w = config.weights(Side::Woman);
        let men_w = config.weights(Side::Man);
        let mut men_keys = Vec::with_capacity(config.n_men() * config.n_women());
        for _ in 0..config.n_men() {
            men_keys.extend(race_keys(&women_w, rng));
        }
        let mut women_keys = Vec::with_capacity(config.n_men() * config.n_women());
        for _ in 0..config.n_women() {
            women_keys.extend(race_keys(&men_w, rng));
        }
        ClockProfile {
            n_men: config.n_men(),
            n_women: config.n_women(),
            men_keys,
            women_keys,
        }
    }

    pub fn size(&self, side: Side) -> usize {
        match side {
            Side::Man => self.n_men,
            Side::Woman => self.n_women,
        }
    }

    /// Clocks agent `a` on `side` holds for the other side.
    #[inline]
    pub fn keys(&self, side: Side, a: usize) -> &[f64] {
        match side {
            Side::Man => &self.men_keys[a * self.n_women..(a + 1) * self.n_women],
            Side::Woman => &self.women_keys[a * self.n_men..(a + 1) * self.n_men],
        }
    }

    /// Lazily sorted preference cursors for every agent on `side`.
    pub fn cursors(&self, side: Side) -> Vec<LazyList<'_>> {
        (0..self.size(side)).map(|a| LazyList::new(self.keys(side, a))).collect()
    }

    /// Materialize sorted lists.
    pub fn to_profile(&self, config: &MarketConfig) -> Result<PreferenceProfile> {
        let sort = |side: Side| -> Vec<Vec<u32>> {
            (0..self.size(side))
                .map(|a| {
                    let keys = self.keys(side, a);
                    let mut order: Vec<u32> = (0..keys.len() as u32).collect();
                    order.sort_unstable_by(|&x, &y| keys[x as usize].total_cmp(&keys[y as usize]));
                    order
                })
                .collect()
        };
        PreferenceProfile::for_market(sort(Side::Man), sort(Side::Woman), config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Preference list revealed one entry at a time from a clock row.
#[derive(Debug, Clone)]
pub struct LazyList<'a> {
    keys: &'a [f64],
    heap: Option<BinaryHeap<Reverse<(Key, u32)>>>,
}

impl<'a> LazyList<'a> {
    fn new(keys: &'a [f64]) -> Self {
        LazyList { keys, heap: None }
    }

    /// Next most preferred agent not yet returned.
    pub fn next_choice(&mut self) -> Option<u32> {
        let keys = self.keys;
        let heap = self.heap.get_or_insert_with(|| {
            keys.iter()
                .enumerate()
                .map(|(i, &k)| Reverse((Key(k), i as u32)))
                .collect()
        });
        heap.pop().map(|Reverse((_, i))| i)
    }
}
