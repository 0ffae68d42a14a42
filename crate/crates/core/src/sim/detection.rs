//! Attack-detection trials.
//!
//! Hash rates are in units of the initial network total: the simulated
//! miner starts committed to `q = attacker_fraction` and an honest
//! background of constant rate `1 - q` supplies the rest. While the miner's
//! commitment for an interval is `c`, difficulty is `T (1 - q + c)`, and the
//! miner's blocks arrive as a Poisson process at their actual rate divided
//! by difficulty. Rates change only at the miner's own blocks or at the end
//! of a drop; arrivals restart memorylessly at each change.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{BehaviorKind, BehaviorModel};
use crate::error::{domain, Error, Result};
use crate::stats::{exp_sample, RngStream};
use crate::validity::{params_for, SlidingValidator, ValidityParams, WindowOutcome, MIN_FRACTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Simulated miner's initial share of network hash rate.
    pub attacker_fraction: f64,
    pub behavior: BehaviorModel,
    /// Seconds simulated after the miner's first long window completes.
    pub duration: f64,
    /// Stop after this many of the miner's blocks, if set.
    #[serde(default)]
    pub horizon_blocks: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Target block time, seconds.
    pub target: f64,
    pub params: ValidityParams,
}

impl DetectionConfig {
    /// Defaults: tabulated window parameters, 600 s target, one year, 1000
    /// trials.
    pub fn new(attacker_fraction: f64, behavior: BehaviorModel, seed: u64) -> Result<Self> {
        let cfg = Self {
            attacker_fraction,
            behavior,
            duration: crate::YEAR,
            horizon_blocks: None,
            trials: 1000,
            seed,
            target: 600.0,
            params: params_for(attacker_fraction)?,
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        let q = self.attacker_fraction;
        if !(MIN_FRACTION..=1.0).contains(&q) {
            return Err(Error::Config(format!(
                "attacker fraction {q} outside [{MIN_FRACTION}, 1]"
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(self.target > 0.0) {
            return Err(Error::Config(format!("target {} must be positive", self.target)));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(Error::Config(format!("duration {} must be nonnegative", self.duration)));
        }
        if self.horizon_blocks == Some(0) {
            return Err(Error::Config("horizon must be at least one block".into()));
        }
        if self.behavior.kind == BehaviorKind::PreferenceFollower {
            return Err(Error::Config(
                "preference followers belong to the expected-time simulation".into(),
            ));
        }
        self.behavior.check()?;
        self.params.check()
    }
}

/// One block of the simulated miner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimBlock {
    /// 1-based count of the miner's blocks.
    pub index: usize,
    pub time_s: f64,
    pub inter_arrival_s: f64,
    pub commitment_hps: f64,
    /// Time-averaged actual rate over the interval.
    pub actual_hps: f64,
    pub report_hps: f64,
    /// Difficulty over the interval, in hashes.
    pub difficulty: f64,
    /// `inter_arrival * report / difficulty`.
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    pub blocks: Vec<SimBlock>,
    /// `Valid` on every window of `n_l` blocks, in order.
    pub windows: Vec<WindowOutcome>,
    /// Time of the miner's `n_l`-th block.
    pub bootstrap_end_time: Option<f64>,
    /// Time of the block closing the first failing window.
    pub first_failure_time: Option<f64>,
    /// Set when the miner's actual rate reached zero and no further block
    /// could arrive.
    pub stalled_at: Option<f64>,
    /// Blocks mined by everyone, the simulated miner included.
    pub network_blocks: u64,
}

/// The per-trial numbers the experiments aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u64,
    pub miner_blocks: usize,
    pub network_blocks: u64,
    pub bootstrap_end_s: Option<f64>,
    /// Outcome of the first window was a failure.
    pub bootstrap_detected: Option<bool>,
    pub first_failure_s: Option<f64>,
    pub windows: usize,
    pub failed_windows: usize,
    pub stalled_at_s: Option<f64>,
}

impl TrialResult {
    pub fn summary(&self) -> TrialSummary {
        TrialSummary {
            trial: self.trial,
            miner_blocks: self.blocks.len(),
            network_blocks: self.network_blocks,
            bootstrap_end_s: self.bootstrap_end_time,
            bootstrap_detected: self.windows.first().map(|w| !w.passed),
            first_failure_s: self.first_failure_time,
            windows: self.windows.len(),
            failed_windows: self.windows.iter().filter(|w| !w.passed).count(),
            stalled_at_s: self.stalled_at,
        }
    }
}

/// Runs trials of one configuration, sharing the critical values.
#[derive(Debug, Clone)]
pub struct DetectionRunner {
    config: DetectionConfig,
    validator: SlidingValidator,
}

const ARRIVAL_LANE: u16 = 0;
const WALK_LANE: u16 = 1;
const BACKGROUND_LANE: u16 = 2;

impl DetectionRunner {
    pub fn new(config: DetectionConfig) -> Result<Self> {
        config.check()?;
        let validator = SlidingValidator::new(config.params)?;
        Ok(Self { config, validator })
    }

    pub fn config(&self) -> &DetectionConfig {
        &self.config
    }

    pub fn run(&self, trial: u64) -> Result<TrialResult> {
        let cfg = &self.config;
        let ValidityParams { n_s, n_l, .. } = cfg.params;
        let kind = cfg.behavior.kind;
        let q = cfg.attacker_fraction;
        let background = 1.0 - q;
        let step_sd = cfg.behavior.walk_sd * q;
        let drops = matches!(kind, BehaviorKind::ShortRangeDishonest | BehaviorKind::HonestWithDrops);

        let mut arrivals = RngStream::for_trial(cfg.seed, trial, ARRIVAL_LANE);
        let mut walk_rng = RngStream::for_trial(cfg.seed, trial, WALK_LANE);
        let mut bg_rng = RngStream::for_trial(cfg.seed, trial, BACKGROUND_LANE);

        let mut blocks: Vec<SimBlock> = Vec::new();
        let mut network_blocks = 0u64;
        let mut walk = q;
        let mut t = 0.0;
        let mut drop_end = f64::NEG_INFINITY;
        let mut bootstrap_end = None;
        let mut stalled_at = None;

        for j in 1usize.. {
            if cfg.horizon_blocks.is_some_and(|h| j > h) {
                break;
            }
            let stop_at = bootstrap_end.map(|b: f64| b + cfg.duration);
            if stop_at.is_some_and(|s| t >= s) {
                break;
            }
            let commitment = match kind {
                BehaviorKind::LongRangeDishonest => q,
                _ => walk,
            };
            let difficulty = cfg.target * (background + commitment);
            // The last n_s intervals of every n_l-block window.
            let in_drop_window = drops && (j - 1) % n_l >= n_l - n_s;
            if in_drop_window && (j - 1) % n_l == n_l - n_s {
                drop_end = t + cfg.behavior.drop_duration.unwrap_or(f64::INFINITY);
            }

            let mut elapsed = 0.0;
            let mut work = 0.0;
            let mut rates = 0;
            let mut last_rate = walk;
            let arrived = loop {
                let now = t + elapsed;
                let dropping = in_drop_window && now < drop_end;
                let rate = if dropping {
                    walk * cfg.behavior.drop_factor
                } else {
                    walk
                };
                let until_change = dropping.then_some(drop_end - now);
                if rates == 0 || rate != last_rate {
                    rates += 1;
                    last_rate = rate;
                }
                if rate <= 0.0 {
                    match until_change {
                        Some(dt) => {
                            elapsed += dt;
                            continue;
                        }
                        None => break false,
                    }
                }
                let s = exp_sample(difficulty / rate, &mut arrivals)?;
                match until_change {
                    Some(dt) if s > dt => {
                        elapsed += dt;
                        work += rate * dt;
                    }
                    _ => {
                        elapsed += s;
                        work += rate * s;
                        break true;
                    }
                }
            };
            if !arrived {
                stalled_at = Some(t);
                break;
            }
            if stop_at.is_some_and(|s| t + elapsed > s) {
                break;
            }
            if !(elapsed > 0.0) {
                return Err(Error::Invariant(format!("zero inter-arrival at block {j}")));
            }
            let actual = if rates == 1 { last_rate } else { work / elapsed };
            let report = match kind {
                BehaviorKind::LongRangeDishonest => q,
                BehaviorKind::HonestWithDrops => actual,
                _ => walk,
            };
            if background > 0.0 {
                let lambda = background * elapsed / difficulty;
                if lambda > 0.0 {
                    let pois = Poisson::new(lambda).map_err(|e| Error::Invariant(e.to_string()))?;
                    network_blocks += pois.sample(&mut bg_rng) as u64;
                }
            }
            network_blocks += 1;
            t += elapsed;
            blocks.push(SimBlock {
                index: j,
                time_s: t,
                inter_arrival_s: elapsed,
                commitment_hps: commitment,
                actual_hps: actual,
                report_hps: report,
                difficulty,
                x: elapsed * report / difficulty,
            });
            if j == n_l {
                bootstrap_end = Some(t);
            }
            walk = (walk + step_sd * walk_rng.normal()).max(0.0);
        }

        let xs: Vec<f64> = blocks.iter().map(|b| b.x).collect();
        let windows = self.validator.run(&xs)?;
        let first_failure_time = windows.iter().find(|w| !w.passed).map(|w| blocks[w.end].time_s);
        Ok(TrialResult {
            trial,
            blocks,
            windows,
            bootstrap_end_time: bootstrap_end,
            first_failure_time,
            stalled_at,
            network_blocks,
        })
    }
}

/// One trial of `config`. Builds the critical values each call; use
/// [`DetectionRunner`] for many trials.
pub fn run_detection_trial(config: &DetectionConfig, trial: u64) -> Result<TrialResult> {
    DetectionRunner::new(config.clone())?.run(trial)
}

/// Fraction of trials with a failed window by each grid time, counted from
/// each trial's bootstrap end. Trials that never completed the bootstrap
/// window are left out.
pub fn detection_curve(trials: &[TrialSummary], grid: &[f64]) -> Result<Vec<f64>> {
    if trials.is_empty() {
        return Err(domain("detection curve of no trials"));
    }
    let done: Vec<&TrialSummary> = trials.iter().filter(|t| t.bootstrap_end_s.is_some()).collect();
    if done.is_empty() {
        return Err(domain("no trial completed its bootstrap window"));
    }
    let n = done.len() as f64;
    Ok(grid
        .iter()
        .map(|&g| {
            let hit = done
                .iter()
                .filter(|t| match (t.first_failure_s, t.bootstrap_end_s) {
                    (Some(f), Some(b)) => f <= b + g,
                    _ => false,
                })
                .count();
            hit as f64 / n
        })
        .collect())
}
