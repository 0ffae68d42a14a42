//! Deterministic expected-block-time simulation.
//!
//! No sampling: every block takes exactly its expected time `D / h`, so the
//! series shows only how each difficulty rule reacts to hash-rate changes.

use serde::{Deserialize, Serialize};

use super::{BehaviorKind, BehaviorModel};
use crate::daa::{bm_difficulty, DaaKind, DifficultyState};
use crate::error::{Error, Result};
use crate::protocol::constrain_commitment;

/// Hash-rate preference schedule: `(start day, fraction of available rate)`
/// with days counted from 1.
pub fn reference_schedule() -> Vec<(f64, f64)> {
    vec![
        (1.0, 0.10),
        (2.0, 0.075),
        (3.0, 0.225),
        (4.0, 0.113),
        (5.0, 0.225),
        (6.0, 0.281),
        (7.0, 0.563),
        (8.0, 0.422),
        (9.0, 0.211),
    ]
}

/// Preferred fraction at `t` seconds: the last entry whose day has begun,
/// or the first entry before that.
pub fn preference_at(schedule: &[(f64, f64)], t: f64) -> f64 {
    let day = t / crate::DAY + 1.0;
    schedule
        .iter()
        .take_while(|(d, _)| day >= *d)
        .last()
        .or(schedule.first())
        .map_or(0.0, |(_, f)| *f)
}

/// Actual hash rate of a miner committed to `commitment` who prefers
/// `preference` and tolerates losing `kappa` of the bond per block.
///
/// The per-block loss `b min{1, |h - c|/c}` stays within `kappa b` exactly
/// when `|h - c| <= kappa c`; from `kappa >= 1` on the preference is always
/// affordable.
pub fn follow_preference(preference: f64, commitment: f64, kappa: f64) -> f64 {
    if kappa >= 1.0 {
        preference
    } else {
        preference.clamp(commitment * (1.0 - kappa), commitment * (1.0 + kappa))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTimeConfig {
    pub daa: DaaKind,
    pub miners: usize,
    /// Hash rate each miner could apply, hashes per second.
    pub available_hps: f64,
    /// Every miner follows this model; its schedule and kappa are used.
    pub behavior: BehaviorModel,
    /// Target block time, seconds.
    pub target: f64,
    /// Commitment growth multiple.
    pub mu: f64,
    /// Commitments averaged by the growth constraint.
    pub history: usize,
    /// Seconds simulated.
    pub duration: f64,
}

impl ExpectedTimeConfig {
    /// Ten miners, the tabulated schedule, 600 s target, 14 days.
    pub fn new(daa: DaaKind, kappa: f64) -> Self {
        Self {
            daa,
            miners: 10,
            available_hps: 1000.0,
            behavior: BehaviorModel::preference_follower(reference_schedule(), kappa),
            target: 600.0,
            mu: 2.0,
            history: 1000,
            duration: 14.0 * crate::DAY,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.behavior.check()?;
        if self.behavior.kind != BehaviorKind::PreferenceFollower {
            return Err(Error::Config(
                "expected-time miners must be preference followers".into(),
            ));
        }
        if self.behavior.preference_schedule.is_empty() {
            return Err(Error::Config("preference schedule is empty".into()));
        }
        if self.behavior.preference_schedule.iter().any(|(_, f)| !(*f > 0.0)) {
            return Err(Error::Config("preferences must be positive".into()));
        }
        if self.miners == 0 || self.history == 0 {
            return Err(Error::Config(
                "need at least one miner and one commitment of history".into(),
            ));
        }
        for (name, v) in [
            ("available_hps", self.available_hps),
            ("target", self.target),
            ("duration", self.duration),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name}={v} must be positive")));
            }
        }
        if !(self.mu >= 1.0) {
            return Err(Error::Config(format!("mu={} must be at least 1", self.mu)));
        }
        Ok(())
    }
}

/// Network state during one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedTimePoint {
    pub height: u64,
    /// Block start, seconds.
    pub time_s: f64,
    pub preference_hps: f64,
    pub actual_hps: f64,
    pub commitment_hps: f64,
    pub difficulty: f64,
    pub expected_time_s: f64,
}

/// Runs the schedule through the configured difficulty rule.
///
/// Under `bm`, the miner of block `i` is `i mod miners`; that miner alone
/// updates its commitment toward its preference, subject to the growth
/// constraint over its last `history` commitments. Every miner applies the
/// rate its cost tolerance allows. Under `bch-cw144`, every miner applies
/// its preference directly.
pub fn run_expected_time_sim(cfg: &ExpectedTimeConfig) -> Result<Vec<ExpectedTimePoint>> {
    cfg.check()?;
    let sched = &cfg.behavior.preference_schedule;
    let kappa = cfg.behavior.kappa;
    let m = cfg.miners as f64;
    let pref0 = cfg.available_hps * preference_at(sched, 0.0);

    let mut out = Vec::new();
    let mut t = 0.0;
    let mut height = 0u64;
    match cfg.daa {
        DaaKind::BchCw144 => {
            let mut st = DifficultyState::warm(bm_difficulty(m * pref0, cfg.target)?, cfg.target)?;
            while t < cfg.duration {
                let h = m * cfg.available_hps * preference_at(sched, t);
                let e = st.difficulty / h;
                out.push(ExpectedTimePoint {
                    height,
                    time_s: t,
                    preference_hps: h,
                    actual_hps: h,
                    commitment_hps: f64::NAN,
                    difficulty: st.difficulty,
                    expected_time_s: e,
                });
                st.on_block(e)?;
                t += e;
                height += 1;
            }
        }
        DaaKind::Bm => {
            let mut commitments = vec![pref0; cfg.miners];
            // Ring buffers of each miner's recent commitments.
            let mut hist = vec![vec![pref0; cfg.history]; cfg.miners];
            let mut hist_sum = vec![pref0 * cfg.history as f64; cfg.miners];
            let mut hist_pos = vec![0usize; cfg.miners];
            while t < cfg.duration {
                let p = cfg.available_hps * preference_at(sched, t);
                let who = (height % cfg.miners as u64) as usize;
                let mean = hist_sum[who] / cfg.history as f64;
                let c = constrain_commitment(p, &[mean], cfg.mu)?;
                hist_sum[who] += c - hist[who][hist_pos[who]];
                hist[who][hist_pos[who]] = c;
                hist_pos[who] = (hist_pos[who] + 1) % cfg.history;
                commitments[who] = c;

                let total_c: f64 = commitments.iter().sum();
                let d = bm_difficulty(total_c, cfg.target)?;
                let h: f64 = commitments.iter().map(|&c| follow_preference(p, c, kappa)).sum();
                if !(h > 0.0) {
                    return Err(Error::Invariant(format!("network hash rate {h} at block {height}")));
                }
                // Same value as d / h, but exactly the target when h equals
                // the total commitment.
                let e = cfg.target * (total_c / h);
                out.push(ExpectedTimePoint {
                    height,
                    time_s: t,
                    preference_hps: m * p,
                    actual_hps: h,
                    commitment_hps: total_c,
                    difficulty: d,
                    expected_time_s: e,
                });
                t += e;
                height += 1;
            }
        }
    }
    Ok(out)
}

/// How far a series strays from the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub blocks: usize,
    pub min_time_s: f64,
    pub max_time_s: f64,
    /// `max |E - T|`.
    pub max_abs_deviation_s: f64,
    /// `sum |E - T| E`: deviation integrated over time, seconds squared.
    pub deviation_integral_s2: f64,
    /// Whether actual equals preferred hash rate at every block.
    pub follows_preference: bool,
}

pub fn summarize(series: &[ExpectedTimePoint], target: f64) -> DeviationSummary {
    let mut s = DeviationSummary {
        blocks: series.len(),
        min_time_s: f64::INFINITY,
        max_time_s: f64::NEG_INFINITY,
        max_abs_deviation_s: 0.0,
        deviation_integral_s2: 0.0,
        follows_preference: true,
    };
    for p in series {
        let e = p.expected_time_s;
        s.min_time_s = s.min_time_s.min(e);
        s.max_time_s = s.max_time_s.max(e);
        s.max_abs_deviation_s = s.max_abs_deviation_s.max((e - target).abs());
        s.deviation_integral_s2 += (e - target).abs() * e;
        if (p.actual_hps - p.preference_hps).abs() > 1e-9 * p.preference_hps.abs().max(1.0) {
            s.follows_preference = false;
        }
    }
    s
}
