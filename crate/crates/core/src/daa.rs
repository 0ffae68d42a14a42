//! Difficulty adjustment: the commitment-driven rule and the cw-144
//! rolling-window baseline.
//!
//! Difficulty is expected hashes per block. A block mined at total rate `h`
//! against difficulty `D` takes `D / h` seconds in expectation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Number of blocks in the baseline's rolling window.
pub const CW_WINDOW: usize = 144;

/// Difficulty rule selector as it appears in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DaaKind {
    #[serde(rename = "bm")]
    Bm,
    #[serde(rename = "bch-cw144")]
    BchCw144,
}

impl DaaKind {
    pub fn key(self) -> &'static str {
        match self {
            DaaKind::Bm => "bm",
            DaaKind::BchCw144 => "bch-cw144",
        }
    }
}

impl std::str::FromStr for DaaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm" => Ok(DaaKind::Bm),
            "bch-cw144" => Ok(DaaKind::BchCw144),
            other => Err(Error::Config(format!("unknown difficulty rule `{other}`"))),
        }
    }
}

/// `D = total_commitment * T`.
pub fn bm_difficulty(total_commitment: f64, target: f64) -> Result<f64> {
    if !(total_commitment > 0.0) || !total_commitment.is_finite() {
        return Err(domain(format!("total commitment {total_commitment} must be positive")));
    }
    if !(target > 0.0) {
        return Err(domain(format!("target block time {target} must be positive")));
    }
    Ok(total_commitment * target)
}

/// The window timespan clamped to `[72 T, 288 T]`.
pub fn clamp_timespan(timespan: f64, target: f64) -> f64 {
    timespan.min(288.0 * target).max(72.0 * target)
}

/// `T * sum(D) / M'` over exactly 144 `(difficulty, block time)` pairs.
pub fn bch_difficulty(window: &[(f64, f64)], target: f64) -> Result<f64> {
    if window.is_empty() {
        return Err(domain("empty difficulty window"));
    }
    if window.len() != CW_WINDOW {
        return Err(domain(format!(
            "difficulty window has {} entries, expected {CW_WINDOW}",
            window.len()
        )));
    }
    if !(target > 0.0) {
        return Err(domain(format!("target block time {target} must be positive")));
    }
    let work: f64 = window.iter().map(|(d, _)| d).sum();
    let timespan: f64 = window.iter().map(|(_, t)| t).sum();
    Ok(target * work / clamp_timespan(timespan, target))
}

/// Rolling window state of the cw-144 rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyState {
    pub difficulty: f64,
    pub target: f64,
    window: VecDeque<(f64, f64)>,
}

impl DifficultyState {
    /// Warm start: the window replicates `(difficulty, target)`.
    pub fn warm(difficulty: f64, target: f64) -> Result<Self> {
        if !(difficulty > 0.0) || !(target > 0.0) {
            return Err(domain("warm start needs positive difficulty and target"));
        }
        Ok(Self {
            difficulty,
            target,
            window: std::iter::repeat_n((difficulty, target), CW_WINDOW).collect(),
        })
    }

    pub fn window(&self) -> &VecDeque<(f64, f64)> {
        &self.window
    }

    /// Records a block mined at the current difficulty in `block_time`
    /// seconds and retargets.
    pub fn on_block(&mut self, block_time: f64) -> Result<f64> {
        if !(block_time >= 0.0) || !block_time.is_finite() {
            return Err(domain(format!("block time {block_time} must be nonnegative")));
        }
        self.window.pop_front();
        self.window.push_back((self.difficulty, block_time));
        let w = self.window.make_contiguous();
        self.difficulty = bch_difficulty(w, self.target)?;
        Ok(self.difficulty)
    }
}
