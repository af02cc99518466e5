//! Simulation and analysis of tiered random two-sided matching markets.
//!
//! Agents on each side fall into a few tiers; every agent in a tier shares a
//! public score, and each agent's preference list is drawn by weighted
//! sampling without replacement from the other side. The crate provides
//!
//! * [`market`]: configurations, tier rounding and preference sampling;
//! * [`da`]: deferred acceptance engines, including a lazy engine that runs
//!   markets with hundreds of thousands of agents per side;
//! * [`coupon`]: the coupon collector with unequal probabilities;
//! * [`estimators`]: closed-form leading-order predictions;
//! * [`oracle`]: exact enumeration for very small markets;
//! * [`experiments`]: seeded Monte Carlo studies with CSV output.

pub mod coupon;
pub mod da;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod market;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use da::{
    check_stability, resume_da, run_da_excluding, run_da_explicit, run_da_lazy, run_da_with_reproposals,
    run_woman_proposing_da, smoothness_diagnostics, Matching, MatchingOutcome, PartialMatchingState,
    SmoothnessConstants, SmoothnessReport,
};
pub use error::{Error, Result};
pub use estimators::{estimate, EstimateReport, Prediction};
pub use coupon::CouponSpec;

pub use market::{
    generate_profile, realize_tier_sizes, sample_preference_list, AgentId, MarketConfig, PreferenceProfile,
    Side, TierConfig,
};
pub use rng::SimRng;
