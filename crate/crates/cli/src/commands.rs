//! Command-line surface and dispatch.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{Behavior, ExperimentKind, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::experiments as ex;
use crate::output::{write_csv, Manifest, OutputFile};

#[derive(Debug, Parser)]
#[command(name = "bmsim", version, about = "Bonded-mining experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (TOML). Without it the reference defaults are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trial count, overriding both the desk and full counts.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Use the full trial count instead of the desk count.
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Detection rates at the end of the bootstrap window.
    Table2(Common),
    /// p-values of true and deviant exponential samples.
    Fig2(Common),
    /// Detection probability over a simulated year.
    Fig3(Common),
    /// Expected block times of BCH and BM.
    Fig4(Common),
    /// Expected block times of BM across cost tolerances.
    Fig5(Common),
    /// False-positive counts of honest miners.
    TypeI(Common),
    /// Abandonment thresholds.
    AbandonCheck(Common),
    /// Sliding-window validity of a blocks file.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Blocks CSV, overriding the config.
        #[arg(long)]
        blocks: Option<PathBuf>,
        /// Committed fraction selecting the window parameters, overriding
        /// the config.
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Writes the blocks of one simulated trial.
    GenBlocks {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.5)]
        fraction: f64,
        #[arg(long, value_enum, default_value_t = Behavior::Honest)]
        behavior: Behavior,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// Stop after this many of the miner's blocks.
        #[arg(long)]
        blocks: Option<usize>,
    },
}

impl Cmd {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Cmd::Table2(_) => ExperimentKind::Table2,
            Cmd::Fig2(_) => ExperimentKind::Fig2,
            Cmd::Fig3(_) => ExperimentKind::Fig3,
            Cmd::Fig4(_) => ExperimentKind::Fig4,
            Cmd::Fig5(_) => ExperimentKind::Fig5,
            Cmd::TypeI(_) => ExperimentKind::TypeI,
            Cmd::AbandonCheck(_) => ExperimentKind::AbandonCheck,
            Cmd::Validate { .. } => ExperimentKind::Validate,
            Cmd::GenBlocks { .. } => ExperimentKind::GenBlocks,
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Cmd::Table2(c)
            | Cmd::Fig2(c)
            | Cmd::Fig3(c)
            | Cmd::Fig4(c)
            | Cmd::Fig5(c)
            | Cmd::TypeI(c)
            | Cmd::AbandonCheck(c) => c,
            Cmd::Validate { common, .. } | Cmd::GenBlocks { common, .. } => common,
        }
    }

    fn name(&self) -> &'static str {
        self.kind().key()
    }
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Report {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Human-readable lines for stdout.
    pub lines: Vec<String>,
}

pub fn execute(cmd: &Cmd) -> CliResult<Report> {
    let started = Instant::now();
    let common = cmd.common();
    let mut loaded = match &common.config {
        Some(p) => crate::config::ExperimentConfig::load(p)?,
        None => LoadedConfig::defaults(),
    };
    if let Some(k) = loaded.config.kind {
        if k != cmd.kind() {
            return Err(CliError::Config(format!(
                "config is for {} but the command is {}",
                k.key(),
                cmd.name()
            )));
        }
    }
    if let Some(s) = common.seed {
        loaded.config.seed = s;
    }
    if let Cmd::Validate { fraction: Some(f), .. } = cmd {
        loaded.config.validate.fraction = *f;
        loaded.config.validate.params = None;
    }
    let cfg = &loaded.config;
    let out_dir = common.out.clone().unwrap_or_else(|| cfg.out.clone());
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))?;
    let trials = cfg.trial_count(common.trials, common.full);

    let mut outputs: Vec<OutputFile> = Vec::new();
    let mut lines = Vec::new();
    let mut used_trials = Some(trials);
    match cmd {
        Cmd::Table2(_) => {
            let rows = ex::table2(cfg, trials)?;
            for r in &rows {
                lines.push(format!(
                    "fraction {:>5}: short-range {:.3} ({} completed)  long-range {:.3} ({} completed)",
                    r.hash_fraction,
                    r.short_range_detection_rate,
                    r.short_range_completed_trials,
                    r.long_range_detection_rate,
                    r.long_range_completed_trials
                ));
            }
            outputs.push(write_csv(&out_dir, "table2.csv", "table2", &rows)?);
        }
        Cmd::Fig2(_) => {
            let n = common.trials.unwrap_or(cfg.pvalues.trials);
            used_trials = Some(n);
            let rows = ex::fig2(cfg, n)?;
            outputs.push(write_csv(&out_dir, "fig2.csv", "fig2", &rows)?);
        }
        Cmd::Fig3(_) => {
            let rows = ex::fig3(cfg, trials)?;
            outputs.push(write_csv(&out_dir, "fig3.csv", "fig3", &rows)?);
        }
        Cmd::Fig4(_) => {
            used_trials = None;
            let (bch, bm) = ex::fig4(cfg)?;
            for s in [&bch, &bm] {
                lines.push(summary_line(&s.summary));
            }
            outputs.push(write_csv(&out_dir, "fig4_bch.csv", "series", &bch.rows)?);
            outputs.push(write_csv(&out_dir, "fig4_bm.csv", "series", &bm.rows)?);
            outputs.push(write_csv(
                &out_dir,
                "fig4_summary.csv",
                "summary",
                &[bch.summary, bm.summary],
            )?);
        }
        Cmd::Fig5(_) => {
            used_trials = None;
            let series = ex::fig5(cfg)?;
            let rows: Vec<_> = series.iter().flat_map(|s| s.rows.iter().cloned()).collect();
            let summaries: Vec<_> = series.iter().map(|s| s.summary.clone()).collect();
            lines.extend(summaries.iter().map(summary_line));
            outputs.push(write_csv(&out_dir, "fig5.csv", "series", &rows)?);
            outputs.push(write_csv(&out_dir, "fig5_summary.csv", "summary", &summaries)?);
        }
        Cmd::TypeI(_) => {
            let rows = ex::type_i(cfg, trials)?;
            for r in &rows {
                lines.push(format!(
                    "fraction {:>5} {:<17}: {} failed windows of {}, {} trials with a failure",
                    r.hash_fraction, r.behavior, r.failed_windows, r.windows, r.trials_with_failure
                ));
            }
            outputs.push(write_csv(&out_dir, "type_i.csv", "type_i", &rows)?);
        }
        Cmd::AbandonCheck(_) => {
            used_trials = None;
            let rows = ex::abandon(cfg)?;
            for r in &rows {
                lines.push(format!(
                    "fraction {:>5}: abandon after {:.2} h",
                    r.hash_fraction, r.threshold_h
                ));
            }
            outputs.push(write_csv(&out_dir, "abandon.csv", "abandon", &rows)?);
        }
        Cmd::Validate { blocks, .. } => {
            used_trials = None;
            let path = match (blocks, &cfg.validate.blocks) {
                (Some(p), _) => p.clone(),
                (None, Some(p)) => loaded.resolve(p),
                (None, None) => return Err(CliError::Config("validate needs --blocks or validate.blocks".into())),
            };
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "blocks file {} does not exist",
                    path.display()
                )));
            }
            let params = ex::validate_config_params(cfg)?;
            let outcome = ex::validate(&ex::read_intervals(&path)?, params)?;
            lines.push(format!(
                "verdict: {} ({} of {} windows failed)",
                if outcome.valid { "valid" } else { "invalid" },
                outcome.failed_windows,
                outcome.windows.len()
            ));
            outputs.push(write_csv(&out_dir, "validate.csv", "validate", &outcome.windows)?);
        }
        Cmd::GenBlocks {
            fraction,
            behavior,
            trial,
            blocks,
            ..
        } => {
            used_trials = None;
            let rows = ex::gen_blocks(cfg, *fraction, *behavior, *trial, *blocks)?;
            lines.push(format!("{} blocks", rows.len()));
            outputs.push(write_csv(&out_dir, "blocks.csv", "blocks", &rows)?);
        }
    }

    let mut manifest = Manifest::new(cmd.name(), &loaded.sha256, cfg.seed, used_trials, started.elapsed());
    manifest.outputs = outputs;
    manifest.write(&out_dir)?;
    Ok(Report {
        out_dir,
        manifest,
        lines,
    })
}

fn summary_line(s: &ex::SummaryRow) -> String {
    let name = match s.kappa {
        Some(k) => format!("{} kappa={k}", s.series),
        None => s.series.clone(),
    };
    format!(
        "{name}: expected time {:.0}..{:.0} s, max deviation {:.0} s",
        s.min_time_s, s.max_time_s, s.max_abs_deviation_s
    )
}
