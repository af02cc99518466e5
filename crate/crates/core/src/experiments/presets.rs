//! The named studies.
//!
//! | name | market | grid | runs |
//! |---|---|---|---|
//! | `women_two_tiers` | n = 1000, men uniform, ε = (ε₁, 1 − ε₁), α = (α₁, 1) | α₁ = 1..10 by 0.25, ε₁ = 0.025..0.975 by 0.025 | 200 |
//! | `men_two_tiers` | n = 1000, women uniform, δ = (δ₁, 1 − δ₁), β = (β₁, 1) | β₁ = 1..10 by 0.25, δ₁ = 0.025..0.975 by 0.025 | 200 |
//! | `match_distribution` | δ = ε = (½, ½), β = (3, 1), α = (5, 1) | n = 2ᵏ, k = 4..18 | 1000 |
//! | `match_distribution_growing_score` | as above with β₁ = √n / 2 | n = 2ᵏ, k = 4..18 | 200 |
//! | `tier_convergence` | δ = (¼, ¾), β = (3, 1), ε = (1/16, 5/16, 5/8), α = (3, 2, 1) | n = 2ᵏ, k = 4..19 | 1000 |
//! | `unbalanced_core` | 1000 men, δ = (0.3, 0.7), β = (3, 1), women in one tier | n_women = 990..1010 | 1000 |

use super::{Axis, ExperimentSpec, MarketTemplate, Quantity, SideTemplate, StatisticFlags};
use crate::error::{Error, Result};

pub const PRESET_NAMES: [&str; 6] = [
    "women_two_tiers",
    "men_two_tiers",
    "match_distribution",
    "match_distribution_growing_score",
    "tier_convergence",
    "unbalanced_core",
];

fn side(proportions: &[Quantity], scores: &[Quantity]) -> SideTemplate {
    SideTemplate {
        proportions: proportions.to_vec(),
        scores: scores.to_vec(),
    }
}

fn uniform() -> SideTemplate {
    side(&[1.0.into()], &[1.0.into()])
}

fn q(v: f64) -> Quantity {
    v.into()
}

fn e(s: &str) -> Quantity {
    s.into()
}

fn balanced(n: Quantity, men: SideTemplate, women: SideTemplate) -> MarketTemplate {
    MarketTemplate {
        n,
        n_men: None,
        n_women: None,
        men,
        women,
    }
}

fn spec(name: &str, sweep: Vec<Axis>, market: MarketTemplate, runs: usize, seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        name: name.to_string(),
        sweep,
        market,
        runs_per_point: runs,
        base_seed: seed,
        statistics: StatisticFlags::default(),
        allow_unbalanced: false,
    }
}

fn powers(lo: i32, hi: i32) -> Axis {
    Axis::list("k", (lo..=hi).map(f64::from).collect())
}

pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let two_by = |var| vec![Axis::range(var, 1.0, 10.0, 0.25)];
    let out = match name {
        "women_two_tiers" => {
            let mut sweep = two_by("alpha1");
            sweep.push(Axis::range("eps1", 0.025, 0.975, 0.025));
            let women = side(&[e("eps1"), e("1 - eps1")], &[e("alpha1"), q(1.0)]);
            spec(name, sweep, balanced(q(1000.0), uniform(), women), 200, 61)
        }
        "men_two_tiers" => {
            let mut sweep = two_by("beta1");
            sweep.push(Axis::range("delta1", 0.025, 0.975, 0.025));
            let men = side(&[e("delta1"), e("1 - delta1")], &[e("beta1"), q(1.0)]);
            spec(name, sweep, balanced(q(1000.0), men, uniform()), 200, 62)
        }
        "match_distribution" => {
            let men = side(&[q(0.5), q(0.5)], &[q(3.0), q(1.0)]);
            let women = side(&[q(0.5), q(0.5)], &[q(5.0), q(1.0)]);
            spec(name, vec![powers(4, 18)], balanced(e("pow(2, k)"), men, women), 1000, 63)
        }
        "match_distribution_growing_score" => {
            let men = side(&[q(0.5), q(0.5)], &[e("sqrt(n) / 2"), q(1.0)]);
            let women = side(&[q(0.5), q(0.5)], &[q(5.0), q(1.0)]);
            spec(name, vec![powers(4, 18)], balanced(e("pow(2, k)"), men, women), 200, 64)
        }
        "tier_convergence" => {
            let men = side(&[q(0.25), q(0.75)], &[q(3.0), q(1.0)]);
            let women = side(
                &[e("1/16"), e("5/16"), e("5/8")],
                &[q(3.0), q(2.0), q(1.0)],
            );
            spec(name, vec![powers(4, 19)], balanced(e("pow(2, k)"), men, women), 1000, 65)
        }
        "unbalanced_core" => {
            let market = MarketTemplate {
                n: q(1000.0),
                n_men: Some(q(1000.0)),
                n_women: Some(e("w")),
                men: side(&[q(0.3), q(0.7)], &[q(3.0), q(1.0)]),
                women: uniform(),
            };
            let mut s = spec(name, vec![Axis::range("w", 990.0, 1010.0, 1.0)], market, 1000, 66);
            s.allow_unbalanced = true;
            s.statistics.core_size = true;
            s
        }
        other => {
            return Err(Error::config(format!(
                "unknown preset `{other}`; available presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(out)
}
