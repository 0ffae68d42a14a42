//! The experiments behind each subcommand. Each returns typed rows; writing
//! them out is left to [`crate::output`].

use std::path::Path;

use bonded_mining::daa::DaaKind;
use bonded_mining::protocol::abandonment_threshold;
use bonded_mining::sim::{
    detection_curve, pvalue_sample, run_expected_time_sim, summarize, DetectionConfig, DetectionRunner,
    ExpectedTimePoint, SampleKind, SimBlock, TrialSummary,
};
use bonded_mining::stats::ks_pvalue;
use bonded_mining::validity::{params_for, ReportedInterval, SlidingValidator, ValidityParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Behavior, ExperimentConfig, ParamRow};
use crate::error::{CliError, CliResult};

/// Summaries of `trials` independent trials, in trial order.
pub fn run_trials(cfg: DetectionConfig) -> CliResult<Vec<TrialSummary>> {
    let trials = cfg.trials as u64;
    let runner = DetectionRunner::new(cfg)?;
    let out: bonded_mining::Result<Vec<TrialSummary>> = (0..trials)
        .into_par_iter()
        .map(|t| runner.run(t).map(|r| r.summary()))
        .collect();
    Ok(out?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub hash_fraction: f64,
    pub trials: usize,
    pub short_range_detection_rate: f64,
    pub long_range_detection_rate: f64,
    /// Trials whose miner reached the end of the bootstrap window.
    pub short_range_completed_trials: usize,
    pub long_range_completed_trials: usize,
}

/// Share of the trials that completed the bootstrap window whose first
/// long window fails, and the number of such trials. A miner whose rate
/// walked to zero never finishes and is left out.
pub fn bootstrap_detection_rate(summaries: &[TrialSummary]) -> (f64, usize) {
    let done = summaries.iter().filter(|s| s.bootstrap_detected.is_some()).count();
    let hits = summaries.iter().filter(|s| s.bootstrap_detected == Some(true)).count();
    let rate = if done == 0 { f64::NAN } else { hits as f64 / done as f64 };
    (rate, done)
}

fn bootstrap_rate(cfg: &ExperimentConfig, row: &ParamRow, b: Behavior, trials: usize) -> CliResult<(f64, usize)> {
    let mut d = cfg.detection.config(row, b, cfg.seed, trials, cfg.network.target_s)?;
    d.horizon_blocks = Some(row.n_l);
    Ok(bootstrap_detection_rate(&run_trials(d)?))
}

pub fn table2(cfg: &ExperimentConfig, trials: usize) -> CliResult<Vec<Table2Row>> {
    cfg.detection
        .params
        .iter()
        .map(|row| {
            let (short, short_done) = bootstrap_rate(cfg, row, Behavior::ShortRange, trials)?;
            let (long, long_done) = bootstrap_rate(cfg, row, Behavior::LongRange, trials)?;
            Ok(Table2Row {
                hash_fraction: row.fraction,
                trials,
                short_range_detection_rate: short,
                long_range_detection_rate: long,
                short_range_completed_trials: short_done,
                long_range_completed_trials: long_done,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Row {
    /// Seconds after the end of the bootstrap window.
    pub time_s: f64,
    pub hash_fraction: f64,
    pub attack: String,
    pub detection_probability: f64,
}

/// Grid from 0 to `duration` inclusive.
pub fn time_grid(duration: f64, step: f64) -> Vec<f64> {
    let n = (duration / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Detection curve of one table row and behaviour.
pub fn detection_series(cfg: &ExperimentConfig, row: &ParamRow, b: Behavior, trials: usize) -> CliResult<Vec<Fig3Row>> {
    let d = cfg.detection.config(row, b, cfg.seed, trials, cfg.network.target_s)?;
    let grid = time_grid(cfg.detection.duration_s, cfg.detection.grid_step_s);
    let probs = detection_curve(&run_trials(d)?, &grid)?;
    Ok(grid
        .into_iter()
        .zip(probs)
        .map(|(time_s, p)| Fig3Row {
            time_s,
            hash_fraction: row.fraction,
            attack: b.key().to_string(),
            detection_probability: p,
        })
        .collect())
}

pub fn fig3(cfg: &ExperimentConfig, trials: usize) -> CliResult<Vec<Fig3Row>> {
    let mut behaviors = vec![Behavior::ShortRange, Behavior::LongRange];
    if cfg.detection.honest_control {
        behaviors.push(Behavior::Honest);
    }
    let mut rows = Vec::new();
    for row in &cfg.detection.params {
        for &b in &behaviors {
            rows.extend(detection_series(cfg, row, b, trials)?);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeIRow {
    pub hash_fraction: f64,
    pub behavior: String,
    pub trials: usize,
    pub windows: usize,
    pub failed_windows: usize,
    pub trials_with_failure: usize,
    pub stalled_trials: usize,
}

pub fn type_i(cfg: &ExperimentConfig, trials: usize) -> CliResult<Vec<TypeIRow>> {
    let mut rows = Vec::new();
    for row in &cfg.detection.params {
        for b in [Behavior::Honest, Behavior::HonestWithDrops] {
            let d = cfg.detection.config(row, b, cfg.seed, trials, cfg.network.target_s)?;
            let s = run_trials(d)?;
            rows.push(TypeIRow {
                hash_fraction: row.fraction,
                behavior: b.key().to_string(),
                trials,
                windows: s.iter().map(|t| t.windows).sum(),
                failed_windows: s.iter().map(|t| t.failed_windows).sum(),
                trials_with_failure: s.iter().filter(|t| t.first_failure_s.is_some()).count(),
                stalled_trials: s.iter().filter(|t| t.stalled_at_s.is_some()).count(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Row {
    pub kind: String,
    pub trial: u64,
    pub p_value: f64,
}

pub fn fig2(cfg: &ExperimentConfig, trials: usize) -> CliResult<Vec<Fig2Row>> {
    let p = &cfg.pvalues;
    let mut rows = Vec::with_capacity(2 * trials);
    for (kind, key) in [(SampleKind::True, "true"), (SampleKind::Deviant, "deviant")] {
        let ps: bonded_mining::Result<Vec<f64>> = (0..trials as u64)
            .into_par_iter()
            .map(|t| pvalue_sample(kind, p.samples, p.walk_sd, cfg.seed, t))
            .collect();
        rows.extend(ps?.into_iter().enumerate().map(|(t, p_value)| Fig2Row {
            kind: key.to_string(),
            trial: t as u64,
            p_value,
        }));
    }
    Ok(rows)
}

/// One point of an expected-time series. The commitment is empty for rules
/// without commitments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub series: String,
    pub kappa: Option<f64>,
    pub height: u64,
    pub time_s: f64,
    pub preference_hps: f64,
    pub actual_hps: f64,
    pub commitment_hps: Option<f64>,
    pub difficulty: f64,
    pub expected_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub series: String,
    pub kappa: Option<f64>,
    pub blocks: usize,
    pub min_time_s: f64,
    pub max_time_s: f64,
    pub max_abs_deviation_s: f64,
    pub deviation_integral_s2: f64,
    pub follows_preference: bool,
}

/// A named expected-time series and its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub rows: Vec<SeriesRow>,
    pub summary: SummaryRow,
}

pub fn expected_series(cfg: &ExperimentConfig, daa: DaaKind, kappa: f64) -> CliResult<Series> {
    let net = cfg.network.params()?;
    let points = run_expected_time_sim(&cfg.expected.config(daa, kappa, &net)?)?;
    let kappa = (daa == DaaKind::Bm).then_some(kappa);
    let name = daa.key().to_string();
    let s = summarize(&points, net.target);
    let rows = points
        .iter()
        .map(|p: &ExpectedTimePoint| SeriesRow {
            series: name.clone(),
            kappa,
            height: p.height,
            time_s: p.time_s,
            preference_hps: p.preference_hps,
            actual_hps: p.actual_hps,
            commitment_hps: p.commitment_hps.is_finite().then_some(p.commitment_hps),
            difficulty: p.difficulty,
            expected_time_s: p.expected_time_s,
        })
        .collect();
    Ok(Series {
        rows,
        summary: SummaryRow {
            series: name,
            kappa,
            blocks: s.blocks,
            min_time_s: s.min_time_s,
            max_time_s: s.max_time_s,
            max_abs_deviation_s: s.max_abs_deviation_s,
            deviation_integral_s2: s.deviation_integral_s2,
            follows_preference: s.follows_preference,
        },
    })
}

/// The BCH rule and BM at the configured comparison tolerance.
pub fn fig4(cfg: &ExperimentConfig) -> CliResult<(Series, Series)> {
    Ok((
        expected_series(cfg, DaaKind::BchCw144, 0.0)?,
        expected_series(cfg, DaaKind::Bm, cfg.expected.fig4_kappa)?,
    ))
}

/// BM at every configured tolerance, then the BCH reference.
pub fn fig5(cfg: &ExperimentConfig) -> CliResult<Vec<Series>> {
    let mut out = cfg
        .expected
        .kappas
        .iter()
        .map(|&k| expected_series(cfg, DaaKind::Bm, k))
        .collect::<CliResult<Vec<_>>>()?;
    out.push(expected_series(cfg, DaaKind::BchCw144, 0.0)?);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbandonRow {
    pub hash_fraction: f64,
    pub target_s: f64,
    pub abandon_p: f64,
    pub mean_interval_s: f64,
    pub threshold_s: f64,
    pub threshold_h: f64,
}

pub fn abandon(cfg: &ExperimentConfig) -> CliResult<Vec<AbandonRow>> {
    let net = cfg.network.params()?;
    cfg.abandon
        .fractions
        .iter()
        .map(|&q| {
            let threshold_s = abandonment_threshold(q, 1.0, &net)?;
            Ok(AbandonRow {
                hash_fraction: q,
                target_s: net.target,
                abandon_p: net.abandon_p,
                mean_interval_s: net.target / q,
                threshold_s,
                threshold_h: threshold_s / 3600.0,
            })
        })
        .collect()
}

/// One reported block interval as read from or written to a blocks file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub index: usize,
    pub time_s: f64,
    pub inter_arrival_s: f64,
    pub commitment_hps: f64,
    pub actual_hps: f64,
    pub reported_hps: f64,
    pub avg_difficulty: f64,
}

impl From<&SimBlock> for BlockRow {
    fn from(b: &SimBlock) -> Self {
        Self {
            index: b.index,
            time_s: b.time_s,
            inter_arrival_s: b.inter_arrival_s,
            commitment_hps: b.commitment_hps,
            actual_hps: b.actual_hps,
            reported_hps: b.report_hps,
            avg_difficulty: b.difficulty,
        }
    }
}

/// The columns `validate` needs; anything else in the file is ignored.
#[derive(Debug, Clone, Copy, Deserialize)]
struct ReportedRow {
    inter_arrival_s: f64,
    reported_hps: f64,
    avg_difficulty: f64,
}

/// Blocks of one simulated trial.
pub fn gen_blocks(
    cfg: &ExperimentConfig,
    fraction: f64,
    behavior: Behavior,
    trial: u64,
    blocks: Option<usize>,
) -> CliResult<Vec<BlockRow>> {
    let row = match cfg.detection.params.iter().find(|r| r.fraction == fraction) {
        Some(r) => *r,
        None => {
            let p = params_for(fraction)?;
            ParamRow {
                fraction,
                n_s: p.n_s,
                n_l: p.n_l,
                tau_s: p.tau_s,
                tau_l: p.tau_l,
            }
        }
    };
    let mut d = cfg
        .detection
        .config(&row, behavior, cfg.seed, 1, cfg.network.target_s)?;
    d.horizon_blocks = blocks;
    let r = DetectionRunner::new(d)?.run(trial)?;
    Ok(r.blocks.iter().map(BlockRow::from).collect())
}

/// Reads reported intervals; errors name the offending data row (1-based,
/// header excluded).
pub fn read_intervals(path: &Path) -> CliResult<Vec<ReportedInterval>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<ReportedRow>().enumerate() {
        let row = i + 1;
        let r = rec.map_err(|e| CliError::Data(format!("{}: row {row}: {e}", path.display())))?;
        let iv = ReportedInterval::new(r.inter_arrival_s, r.reported_hps, r.avg_difficulty)
            .map_err(|e| CliError::Data(format!("{}: row {row}: {e}", path.display())))?;
        out.push(iv);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateRow {
    /// 1-based index of the window's last block.
    pub window_end: usize,
    pub delta_short: f64,
    pub p_short: f64,
    pub delta_long: f64,
    pub p_long: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOutcome {
    pub windows: Vec<ValidateRow>,
    /// Whether the latest window passes.
    pub valid: bool,
    pub failed_windows: usize,
}

pub fn validate_config_params(cfg: &ExperimentConfig) -> CliResult<ValidityParams> {
    Ok(match &cfg.validate.params {
        Some(r) => r.params(),
        None => params_for(cfg.validate.fraction)?,
    })
}

pub fn validate(intervals: &[ReportedInterval], params: ValidityParams) -> CliResult<ValidateOutcome> {
    if intervals.len() < params.n_l {
        return Err(bonded_mining::Error::InsufficientData {
            needed: params.n_l,
            available: intervals.len(),
        }
        .into());
    }
    let xs: Vec<f64> = intervals.iter().map(|i| i.x()).collect();
    let windows = SlidingValidator::new(params)?
        .run(&xs)?
        .into_iter()
        .map(|w| {
            Ok(ValidateRow {
                window_end: w.end + 1,
                delta_short: w.delta_short,
                p_short: ks_pvalue(w.delta_short, params.n_s)?,
                delta_long: w.delta_long,
                p_long: ks_pvalue(w.delta_long, params.n_l)?,
                passed: w.passed,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let valid = windows.last().is_some_and(|w| w.passed);
    let failed_windows = windows.iter().filter(|w| !w.passed).count();
    Ok(ValidateOutcome {
        windows,
        valid,
        failed_windows,
    })
}
