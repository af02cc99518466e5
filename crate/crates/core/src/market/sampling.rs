//! Weighted sampling of preference orders.
//!
//! Two interchangeable samplers produce a permutation in which each next
//! element is drawn with probability proportional to its weight among the
//! elements not yet drawn:
//!
//! * [`sample_preference_list`] sorts independent `Exp(wᵢ)` variates
//!   ascending (the exponential race);
//! * [`sample_preference_list_sequential`] performs the draws one at a time
//!   over a Fenwick tree of the remaining weights.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::config("cannot order an empty weight vector"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::config(format!("weight {w} is not positive")));
    }
    Ok(())
}

/// One `Exp(wᵢ)` clock per index. Smaller clocks are preferred.
pub fn race_keys<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<f64> {
    weights
        .iter()
        .map(|w| rng.sample::<f64, _>(Exp1) / w)
        .collect()
}

/// Weighted order by exponential race.
pub fn sample_preference_list<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<u32>> {
    check_weights(weights)?;
    let keys = race_keys(weights, rng);
    let mut order: Vec<u32> = (0..weights.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| keys[a as usize].total_cmp(&keys[b as usize]));
    Ok(order)
}

/// Weighted order by successive draws without replacement.
pub fn sample_preference_list_sequential<R: Rng + ?Sized>(
    weights: &[f64],
    rng: &mut R,
) -> Result<Vec<u32>> {
    check_weights(weights)?;
    let mut tree = Fenwick::new(weights);
    let mut remaining = vec![true; weights.len()];
    let mut order = Vec::with_capacity(weights.len());
    for _ in 0..weights.len() {
        let total = tree.total();
        let target = rng.random::<f64>() * total;
        let mut pick = tree.search(target);
        if pick >= weights.len() || !remaining[pick] {
            // Rounding pushed the target past the live mass.
            pick = (0..weights.len()).rev().find(|&i| remaining[i]).expect("one left");
        }
        remaining[pick] = false;
        tree.add(pick, -weights[pick]);
        order.push(pick as u32);
    }
    Ok(order)
}

/// Probability of drawing exactly `order` (a permutation of the indices)
/// by successive weighted draws without replacement:
/// `∏ₜ w_{σ(t)} / (W − Σ_{s<t} w_{σ(s)})`.
pub fn sequential_order_probability(weights: &[f64], order: &[u32]) -> f64 {
    let mut remaining: f64 = weights.iter().sum();
    let mut p = 1.0;
    for &i in order {
        let w = weights[i as usize];
        p *= w / remaining;
        remaining -= w;
    }
    p
}

struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mut tree = vec![0.0; n + 1];
        tree[1..].copy_from_slice(values);
        for i in 1..=n {
            let parent = i + (i & i.wrapping_neg());
            if parent <= n {
                tree[parent] += tree[i];
            }
        }
        Fenwick { tree }
    }

    fn add(&mut self, index: usize, delta: f64) {
        let mut i = index + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut i = self.tree.len() - 1;
        let mut sum = 0.0;
        while i > 0 {
            sum += self.tree[i];
            i &= i - 1;
        }
        sum
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn search(&self, mut target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}
