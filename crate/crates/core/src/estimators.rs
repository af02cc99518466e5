//! Closed-form leading-order predictions for balanced tiered markets.
//!
//! All values are leading terms; the true expectations differ by factors
//! `1 ± O(1/ln n)`. The coupon collector bounds on the total number of
//! proposals are the only rigorous finite-`n` envelope, and the rank
//! predictions are also reported with that envelope substituted for the
//! leading term of the proposal count.

use serde::Serialize;

use crate::coupon::{expectation_asymptotic_tiered, expectation_bounds_tiered};
use crate::error::{Error, Result};
use crate::market::MarketConfig;

/// A predicted value with an optional envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub leading: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Prediction {
    fn point(leading: f64) -> Self {
        Prediction { leading, lower: None, upper: None }
    }

    fn with(leading: f64, bounds: Option<(f64, f64)>) -> Self {
        Prediction {
            leading,
            lower: bounds.map(|b| b.0),
            upper: bounds.map(|b| b.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedScalars {
    pub eps_dot_alpha: f64,
    pub alpha_min: f64,
    pub delta_dot_beta: f64,
    pub delta_dot_inv_beta: f64,
}

impl DerivedScalars {
    pub fn of(config: &MarketConfig) -> Self {
        DerivedScalars {
            eps_dot_alpha: config.women().weighted_score(),
            alpha_min: config.women().min_score(),
            delta_dot_beta: config.men().weighted_score(),
            delta_dot_inv_beta: config.men().weighted_inverse_score(),
        }
    }

    /// `(δ·β)(δ·β⁻¹)`, at least 1 by Jensen.
    pub fn men_dispersion(&self) -> f64 {
        self.delta_dot_beta * self.delta_dot_inv_beta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub n: usize,
    pub men_rank_by_tier: Vec<f64>,
    pub women_rank_by_tier: Vec<f64>,
    /// Rows are women's tiers, columns men's tiers.
    pub match_type_prob: Vec<Vec<f64>>,
    pub total_proposals_leading: f64,
    /// `None` when the rarest women's tier has fewer than one member.
    pub total_proposals_bounds: Option<(f64, f64)>,
    /// Men's ranks with the proposal-count bounds in place of the leading term.
    pub men_rank_bounds: Option<Vec<(f64, f64)>>,
    pub women_rank_bounds: Option<Vec<(f64, f64)>>,
    pub derived_scalars: DerivedScalars,
}

fn require_balanced(config: &MarketConfig) -> Result<()> {
    if config.is_balanced() {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "estimates need a balanced market, got {} men and {} women",
            config.n_men(),
            config.n_women()
        )))
    }
}

/// `(ε·α/α_min) · (1/(δ·β⁻¹)) · ln n / β_j` per men's tier.
pub fn estimate_men_rank(config: &MarketConfig) -> Result<Vec<f64>> {
    require_balanced(config)?;
    let d = DerivedScalars::of(config);
    let ln_n = (config.n_men() as f64).ln();
    Ok(config
        .men()
        .scores()
        .iter()
        .map(|b| d.eps_dot_alpha / d.alpha_min / d.delta_dot_inv_beta * ln_n / b)
        .collect())
}

/// `(δ·β)(δ·β⁻¹) · (α_min/α_i) · n / ln n` per women's tier.
pub fn estimate_women_rank(config: &MarketConfig) -> Result<Vec<f64>> {
    require_balanced(config)?;
    let d = DerivedScalars::of(config);
    let n = config.n_women() as f64;
    Ok(config
        .women()
        .scores()
        .iter()
        .map(|a| d.men_dispersion() * (d.alpha_min / a) * n / n.ln())
        .collect())
}

/// Every row is `δ`.
pub fn estimate_match_type(config: &MarketConfig) -> Result<Vec<Vec<f64>>> {
    require_balanced(config)?;
    let row = config.men().proportions().to_vec();
    Ok(vec![row; config.women().tier_count()])
}

/// `(leading, lower, upper)`; the bounds come from the women's coupon
/// collector.
pub fn estimate_total_proposals(config: &MarketConfig) -> Result<(f64, f64, f64)> {
    require_balanced(config)?;
    let n = config.n_women();
    let (lower, upper) = expectation_bounds_tiered(n, config.women())?;
    Ok((expectation_asymptotic_tiered(n, config.women()), lower, upper))
}

/// All predictions for a balanced market.
pub fn estimate(config: &MarketConfig) -> Result<EstimateReport> {
    require_balanced(config)?;
    let n = config.n_men();
    let d = DerivedScalars::of(config);
    let bounds = expectation_bounds_tiered(n, config.women()).ok();
    let nf = n as f64;
    let men_rank_bounds = bounds.map(|(lo, hi)| {
        config
            .men()
            .scores()
            .iter()
            .map(|b| {
                let scale = 1.0 / (nf * d.delta_dot_inv_beta * b);
                (lo * scale, hi * scale)
            })
            .collect()
    });
    // More proposals mean better ranks for women, so the envelope flips.
    let women_rank_bounds = bounds.map(|(lo, hi)| {
        config
            .women()
            .scores()
            .iter()
            .map(|a| {
                let scale = d.men_dispersion() * nf * nf * d.eps_dot_alpha / a;
                (scale / hi, scale / lo)
            })
            .collect()
    });
    Ok(EstimateReport {
        n,
        men_rank_by_tier: estimate_men_rank(config)?,
        women_rank_by_tier: estimate_women_rank(config)?,
        match_type_prob: estimate_match_type(config)?,
        total_proposals_leading: expectation_asymptotic_tiered(n, config.women()),
        total_proposals_bounds: bounds,
        men_rank_bounds,
        women_rank_bounds,
        derived_scalars: d,
    })
}

fn weighted(props: &[f64], values: &[f64]) -> f64 {
    props.iter().zip(values).map(|(p, v)| p * v).sum()
}

impl EstimateReport {
    /// Predictions keyed by the statistic names used in experiment tables.
    pub fn predictions(&self, config: &MarketConfig) -> Vec<(String, Prediction)> {
        let men_p = config.men().proportions();
        let women_p = config.women().proportions();
        let mut out = Vec::new();
        for (j, &r) in self.men_rank_by_tier.iter().enumerate() {
            let b = self.men_rank_bounds.as_ref().map(|v| v[j]);
            out.push((format!("men_rank_t{}", j + 1), Prediction::with(r, b)));
        }
        for (i, &r) in self.women_rank_by_tier.iter().enumerate() {
            let b = self.women_rank_bounds.as_ref().map(|v| v[i]);
            out.push((format!("women_rank_t{}", i + 1), Prediction::with(r, b)));
        }
        let avg = |p: &[f64], lead: &[f64], b: &Option<Vec<(f64, f64)>>| {
            let bounds = b.as_ref().map(|v| {
                let lo: Vec<f64> = v.iter().map(|x| x.0).collect();
                let hi: Vec<f64> = v.iter().map(|x| x.1).collect();
                (weighted(p, &lo), weighted(p, &hi))
            });
            Prediction::with(weighted(p, lead), bounds)
        };
        out.push(("men_rank_avg".into(), avg(men_p, &self.men_rank_by_tier, &self.men_rank_bounds)));
        out.push(("women_rank_avg".into(), avg(women_p, &self.women_rank_by_tier, &self.women_rank_bounds)));
        out.push((
            "total_proposals".into(),
            Prediction::with(self.total_proposals_leading, self.total_proposals_bounds),
        ));
        for (i, row) in self.match_type_prob.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                out.push((format!("match_w{}_m{}", i + 1, j + 1), Prediction::point(p)));
            }
        }
        // Seen from a man: a tier-j man's wife is in tier i with share ε_i.
        for j in 0..men_p.len() {
            for (i, &e) in women_p.iter().enumerate() {
                out.push((format!("match_m{}_w{}", j + 1, i + 1), Prediction::point(e)));
            }
        }
        out
    }

    pub fn prediction(&self, config: &MarketConfig, statistic: &str) -> Option<Prediction> {
        self.predictions(config).into_iter().find(|(s, _)| s == statistic).map(|(_, p)| p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::TierConfig;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn tiers(p: &[f64], s: &[f64]) -> TierConfig {
        TierConfig::new(p.to_vec(), s.to_vec()).unwrap()
    }

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_reduction() {
        let c = MarketConfig::uniform(1000).unwrap();
        let ln = 1000f64.ln();
        assert_eq!(estimate_men_rank(&c).unwrap(), vec![ln]);
        assert_eq!(estimate_women_rank(&c).unwrap(), vec![1000.0 / ln]);
        assert_eq!(estimate_match_type(&c).unwrap(), vec![vec![1.0]]);
        assert!(approx(ln, 6.9078, 1e-4));
        assert!(approx(1000.0 / ln, 144.76, 1e-2));
        let (lead, lo, hi) = estimate_total_proposals(&c).unwrap();
        assert!(approx(lead, 6907.8, 0.05));
        assert!(lo <= lead && lead <= hi);
    }

    #[test]
    fn worked_examples() {
        let c = MarketConfig::balanced(1000, TierConfig::uniform(), tiers(&[0.5, 0.5], &[5.0, 1.0])).unwrap();
        assert!(approx(estimate_men_rank(&c).unwrap()[0], 20.72, 5e-3));
        let w = estimate_women_rank(&c).unwrap();
        assert!(approx(w[0], 28.95, 5e-3) && approx(w[1], 144.76, 5e-3), "{w:?}");

        let c = MarketConfig::balanced(1000, tiers(&[0.25, 0.75], &[3.0, 1.0]), TierConfig::uniform()).unwrap();
        let m = estimate_men_rank(&c).unwrap();
        assert!(approx(m[0], 2.763, 5e-4) && approx(m[1], 8.289, 5e-4), "{m:?}");
        assert!(approx(m[1] / m[0], 3.0, 1e-12));
        assert!(approx(estimate_women_rank(&c).unwrap()[0], 180.96, 5e-3));

        let fig = tiers(&[1.0 / 16.0, 5.0 / 16.0, 5.0 / 8.0], &[3.0, 2.0, 1.0]);
        let c = MarketConfig::balanced(1000, TierConfig::uniform(), fig).unwrap();
        assert!(approx(estimate_total_proposals(&c).unwrap().0, 9930.0, 0.5));
    }

    #[test]
    fn match_type_rows_are_delta() {
        let c = MarketConfig::balanced(100, tiers(&[0.3, 0.7], &[3.0, 1.0]), tiers(&[0.5, 0.5], &[5.0, 1.0])).unwrap();
        for row in estimate_match_type(&c).unwrap() {
            assert_eq!(row, vec![0.3, 0.7]);
        }
        let single = MarketConfig::balanced(100, TierConfig::uniform(), tiers(&[0.2, 0.8], &[2.0, 1.0])).unwrap();
        assert_eq!(estimate_match_type(&single).unwrap(), vec![vec![1.0], vec![1.0]]);
    }

    #[test]
    fn unbalanced_is_rejected() {
        let c = MarketConfig::unbalanced(10, 11, TierConfig::uniform(), TierConfig::uniform()).unwrap();
        assert!(estimate(&c).is_err());
        assert!(estimate_men_rank(&c).is_err());
    }

    fn random_tiers<R: Rng>(rng: &mut R, lo: f64) -> TierConfig {
        let k = rng.random_range(1..=4);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let scores: Vec<f64> = (0..k).map(|_| rng.random_range(lo..10.0)).collect();
        tiers(&raw.iter().map(|p| p / total).collect::<Vec<_>>(), &scores)
    }

    #[test]
    fn scale_invariance_is_exact() {
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let men = random_tiers(&mut rng, 1.0);
            let women = random_tiers(&mut rng, 1.0);
            let c = MarketConfig::balanced(500, men.clone(), women.clone()).unwrap();
            // Powers of two keep every product exact; other factors agree to rounding.
            for factor in [2.0, 4.0, 8.0, 3.0, 7.3] {
                let scaled_men = MarketConfig::balanced(500, men.scaled(factor).unwrap(), women.clone()).unwrap();
                let scaled_women = MarketConfig::balanced(500, men.clone(), women.scaled(factor).unwrap()).unwrap();
                let base = (estimate_men_rank(&c).unwrap(), estimate_women_rank(&c).unwrap());
                for scaled in [&scaled_men, &scaled_women] {
                    let got = (estimate_men_rank(scaled).unwrap(), estimate_women_rank(scaled).unwrap());
                    if factor == 2f64.powi(factor.log2().round() as i32) {
                        assert_eq!(got, base);
                    } else {
                        for (a, b) in got.0.iter().chain(&got.1).zip(base.0.iter().chain(&base.1)) {
                            assert!(approx(*a, *b, 1e-12 * b));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn reciprocity() {
        let mut rng = rng_from_seed(3);
        for _ in 0..200 {
            let men = random_tiers(&mut rng, 1.0);
            let c = MarketConfig::balanced(800, men.clone(), random_tiers(&mut rng, 1.0)).unwrap();
            let r = estimate_men_rank(&c).unwrap();
            let b = men.scores();
            for i in 0..r.len() {
                for j in 0..r.len() {
                    assert!(approx(r[i] / r[j], b[j] / b[i], 1e-12 * b[j] / b[i]));
                }
            }
        }
    }

    #[test]
    fn dispersion_is_at_least_one() {
        let mut rng = rng_from_seed(4);
        for _ in 0..1000 {
            let c = MarketConfig::balanced(10, random_tiers(&mut rng, 1.0), TierConfig::uniform()).unwrap();
            assert!(DerivedScalars::of(&c).men_dispersion() >= 1.0 - 1e-15);
        }
    }

    #[test]
    fn report_invariants() {
        let mut rng = rng_from_seed(5);
        for _ in 0..50 {
            let men = random_tiers(&mut rng, 1.0);
            let women = random_tiers(&mut rng, 1.0);
            let n = rng.random_range(200..5000);
            let c = MarketConfig::balanced(n, men.clone(), women.clone()).unwrap();
            let r = estimate(&c).unwrap();
            for row in &r.match_type_prob {
                assert!(approx(row.iter().sum::<f64>(), 1.0, 1e-9));
            }
            let check_order = |values: &[f64], scores: &[f64]| {
                for a in 0..values.len() {
                    for b in 0..values.len() {
                        if scores[a] > scores[b] {
                            assert!(values[a] < values[b]);
                        }
                    }
                }
            };
            check_order(&r.men_rank_by_tier, men.scores());
            check_order(&r.women_rank_by_tier, women.scores());
            if let Some((lo, hi)) = r.total_proposals_bounds {
                // A single women's tier makes the lower bound equal the leading term.
                let lead = r.total_proposals_leading;
                assert!(lo <= lead * (1.0 + 1e-12) && lead <= hi, "{lo} {} {hi} {n} {women:?}", r.total_proposals_leading);
                for (j, &(a, b)) in r.men_rank_bounds.as_ref().unwrap().iter().enumerate() {
                    let m = r.men_rank_by_tier[j];
                    assert!(a <= m * (1.0 + 1e-12) && m <= b * (1.0 + 1e-12));
                }
                for (i, &(a, b)) in r.women_rank_bounds.as_ref().unwrap().iter().enumerate() {
                    let w = r.women_rank_by_tier[i];
                    assert!(a <= w * (1.0 + 1e-12) && w <= b * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn prediction_names() {
        let c = MarketConfig::balanced(1000, tiers(&[0.5, 0.5], &[3.0, 1.0]), tiers(&[0.5, 0.5], &[5.0, 1.0])).unwrap();
        let r = estimate(&c).unwrap();
        assert_eq!(r.prediction(&c, "match_w1_m1").unwrap().leading, 0.5);
        assert_eq!(r.prediction(&c, "match_m2_w1").unwrap().leading, 0.5);
        let avg = r.prediction(&c, "men_rank_avg").unwrap();
        assert!(approx(avg.leading * 1000.0, r.total_proposals_leading, 1e-9));
        assert!(r.prediction(&c, "max_proposals").is_none());
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["match_type_prob"][0][0], 0.5);
    }
}
