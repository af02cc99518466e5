//! Summary statistics over per-run values.

use serde::{Deserialize, Serialize};

/// Mean, spread and 3rd/97th percentiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n − 1` denominator; 0 for one value).
    pub std: f64,
    pub stderr: f64,
    pub p3: f64,
    pub p97: f64,
    pub runs: usize,
}

/// Nearest-rank percentile of sorted data: the value at position
/// `⌈q/100 · n⌉` (1-based).
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = (q / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl Summary {
    /// Summarize `values` (in any order). Panics on an empty slice.
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        assert!(n > 0, "summary of an empty sample");
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let std = var.sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        // Summation can round a constant sample's mean past its value.
        let (lo, hi) = (sorted[0], sorted[n - 1]);
        let mean = if lo <= hi { mean.clamp(lo, hi) } else { mean };
        Summary {
            mean,
            std,
            stderr: std / (n as f64).sqrt(),
            p3: nearest_rank(&sorted, 3.0),
            p97: nearest_rank(&sorted, 97.0),
            runs: n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_sample_mean_is_exact() {
        let s = Summary::of(&[0.6; 12]);
        assert_eq!((s.mean, s.p3, s.p97), (0.6, 0.6, 0.6));
    }

    #[test]
    fn single_value() {
        let s = Summary::of(&[4.0]);
        assert_eq!((s.mean, s.std, s.stderr, s.p3, s.p97, s.runs), (4.0, 0.0, 0.0, 4.0, 4.0, 1));
    }

    #[test]
    fn percentiles_by_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = Summary::of(&v);
        assert_eq!(s.p3, 3.0);
        assert_eq!(s.p97, 97.0);
        assert_eq!(s.mean, 50.5);
        assert!((s.std - 29.011_491_975_882_016).abs() < 1e-12);
        let v = [5.0, 1.0, 3.0];
        let s = Summary::of(&v);
        assert_eq!((s.p3, s.p97), (1.0, 5.0));
    }
}
