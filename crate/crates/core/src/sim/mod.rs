//! Simulation engines.
//!
//! - [`detection`]: stochastic block generation for one miner against a
//!   constant honest background, with the validity test run on every
//!   sliding window of the miner's blocks.
//! - [`expected`]: deterministic expected-block-time series for comparing
//!   difficulty rules under a hash-rate preference schedule.
//! - [`pvalues`]: p-value samples of true and deviant exponential
//!   sequences.

pub mod detection;
pub mod expected;
pub mod pvalues;

pub use detection::{
    detection_curve, run_detection_trial, DetectionConfig, DetectionRunner, SimBlock, TrialResult, TrialSummary,
};
pub use expected::{
    follow_preference, preference_at, reference_schedule, run_expected_time_sim, summarize, DeviationSummary,
    ExpectedTimeConfig, ExpectedTimePoint,
};
pub use pvalues::{pvalue_sample, SampleKind};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Miner policy kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    /// Actual rate follows the walk; commitment and report track it.
    HonestRandomWalk,
    /// Honest about the walk, but mines at a fraction of it at the end of
    /// each long window while reporting the commitment.
    ShortRangeDishonest,
    /// Actual rate follows the walk; commitment and report stay at the
    /// initial value.
    LongRangeDishonest,
    /// Follows an exogenous preference schedule within a cost tolerance.
    PreferenceFollower,
    /// Same actual rate as the short-range attacker, but reports the
    /// time-averaged actual rate of every interval.
    HonestWithDrops,
}

/// A miner policy and its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorModel {
    pub kind: BehaviorKind,
    /// Walk step standard deviation, as a fraction of the initial commitment.
    pub walk_sd: f64,
    /// Actual rate during a drop, as a fraction of the commitment.
    pub drop_factor: f64,
    /// Optional cap on a drop's length, seconds. Without it a drop lasts
    /// the whole short window.
    #[serde(default)]
    pub drop_duration: Option<f64>,
    /// `(start day, fraction of available hash rate)`, days counted from 1.
    #[serde(default)]
    pub preference_schedule: Vec<(f64, f64)>,
    /// Fraction of the per-block bond the miner will give up to deviate.
    #[serde(default)]
    pub kappa: f64,
}

impl BehaviorModel {
    fn walk(kind: BehaviorKind) -> Self {
        Self {
            kind,
            walk_sd: 0.01,
            drop_factor: 0.2,
            drop_duration: None,
            preference_schedule: Vec::new(),
            kappa: 0.0,
        }
    }

    pub fn honest() -> Self {
        Self::walk(BehaviorKind::HonestRandomWalk)
    }

    pub fn short_range() -> Self {
        Self::walk(BehaviorKind::ShortRangeDishonest)
    }

    pub fn long_range() -> Self {
        Self::walk(BehaviorKind::LongRangeDishonest)
    }

    pub fn honest_with_drops() -> Self {
        Self::walk(BehaviorKind::HonestWithDrops)
    }

    pub fn preference_follower(schedule: Vec<(f64, f64)>, kappa: f64) -> Self {
        Self {
            preference_schedule: schedule,
            kappa,
            ..Self::walk(BehaviorKind::PreferenceFollower)
        }
    }

    pub fn check(&self) -> Result<()> {
        for (name, v) in [
            ("walk_sd", self.walk_sd),
            ("drop_factor", self.drop_factor),
            ("drop_duration", self.drop_duration.unwrap_or(0.0)),
            ("kappa", self.kappa),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name}={v} must be a nonnegative number")));
            }
        }
        for w in self.preference_schedule.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config(
                    "preference schedule days must be strictly increasing".into(),
                ));
            }
        }
        if let Some((d, f)) = self
            .preference_schedule
            .iter()
            .find(|(d, f)| !(*f >= 0.0) || !d.is_finite())
        {
            return Err(Error::Config(format!("bad preference entry ({d}, {f})")));
        }
        Ok(())
    }
}
