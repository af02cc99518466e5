use serde::{Deserialize, Serialize};

use super::{MarketConfig, TierConfig};
use crate::error::{Error, Result};

/// One side of a market configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierFile {
    pub proportions: Vec<f64>,
    pub scores: Vec<f64>,
}

/// On-disk market configuration.
///
/// ```json
/// {
///   "n_men": 1000,
///   "n_women": 1000,
///   "men":   { "proportions": [0.5, 0.5], "scores": [3, 1] },
///   "women": { "proportions": [0.5, 0.5], "scores": [5, 1] },
///   "seed": 42
/// }
/// ```
///
/// `allow_unbalanced` (default `false`) must be set when the side sizes
/// differ. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub n_men: usize,
    pub n_women: usize,
    pub men: TierFile,
    pub women: TierFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_unbalanced: bool,
}

impl TryFrom<MarketFile> for MarketConfig {
    type Error = Error;

    fn try_from(file: MarketFile) -> Result<Self> {
        MarketConfig::build(
            file.n_men,
            file.n_women,
            TierConfig::new(file.men.proportions, file.men.scores)?,
            TierConfig::new(file.women.proportions, file.women.scores)?,
            file.allow_unbalanced,
            file.seed,
        )
    }
}

impl From<&MarketConfig> for MarketFile {
    fn from(c: &MarketConfig) -> Self {
        let side = |t: &TierConfig| TierFile {
            proportions: t.proportions().to_vec(),
            scores: t.scores().to_vec(),
        };
        MarketFile {
            n_men: c.n_men(),
            n_women: c.n_women(),
            men: side(c.men()),
            women: side(c.women()),
            seed: c.seed(),
            allow_unbalanced: c.allows_unbalanced(),
        }
    }
}
