//! Experiment configuration files.
//!
//! Every field has a default, so an empty file describes the reference
//! setup: 600 s target, 1000 trials (200 at desk scale), the tabulated
//! window parameters and preference schedule, `mu = 2`, `gamma = 0.05`,
//! `p = 0.99999`.

use std::path::{Path, PathBuf};

use bonded_mining::daa::DaaKind;
use bonded_mining::protocol::{Coins, NetworkParams};
use bonded_mining::sim::{reference_schedule, BehaviorModel, DetectionConfig, ExpectedTimeConfig};
use bonded_mining::validity::{ValidityParams, MIN_FRACTION, PARAM_TABLE};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Table2,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    TypeI,
    Validate,
    AbandonCheck,
    GenBlocks,
}

impl ExperimentKind {
    pub fn key(self) -> &'static str {
        match self {
            ExperimentKind::Table2 => "table2",
            ExperimentKind::Fig2 => "fig2",
            ExperimentKind::Fig3 => "fig3",
            ExperimentKind::Fig4 => "fig4",
            ExperimentKind::Fig5 => "fig5",
            ExperimentKind::TypeI => "type-i",
            ExperimentKind::Validate => "validate",
            ExperimentKind::AbandonCheck => "abandon-check",
            ExperimentKind::GenBlocks => "gen-blocks",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    /// Trials of a full run.
    pub trials: usize,
    /// Trials of a desk-scale run.
    pub desk_trials: usize,
    pub out: PathBuf,
    pub network: NetworkConfig,
    pub detection: DetectionSection,
    pub expected: ExpectedSection,
    pub pvalues: PvalueSection,
    pub validate: ValidateSection,
    pub abandon: AbandonSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 2024,
            trials: 1000,
            desk_trials: 200,
            out: PathBuf::from("out"),
            network: NetworkConfig::default(),
            detection: DetectionSection::default(),
            expected: ExpectedSection::default(),
            pvalues: PvalueSection::default(),
            validate: ValidateSection::default(),
            abandon: AbandonSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub target_s: f64,
    pub bond_coins: f64,
    pub mu: f64,
    pub gamma: f64,
    pub abandon_p: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let n = NetworkParams::default();
        Self {
            target_s: n.target,
            bond_coins: n.bond.as_coins(),
            mu: n.mu,
            gamma: n.gamma,
            abandon_p: n.abandon_p,
        }
    }
}

impl NetworkConfig {
    pub fn params(&self) -> CliResult<NetworkParams> {
        let p = NetworkParams {
            target: self.target_s,
            bond: Coins::from_coins(self.bond_coins)
                .map_err(|e| CliError::Config(format!("network.bond_coins: {e}")))?,
            mu: self.mu,
            gamma: self.gamma,
            abandon_p: self.abandon_p,
        };
        p.check().map_err(|e| CliError::Config(format!("network: {e}")))?;
        Ok(p)
    }
}

/// One row of the window-parameter table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRow {
    pub fraction: f64,
    pub n_s: usize,
    pub n_l: usize,
    pub tau_s: f64,
    pub tau_l: f64,
}

impl ParamRow {
    pub fn params(&self) -> ValidityParams {
        ValidityParams {
            n_s: self.n_s,
            n_l: self.n_l,
            tau_s: self.tau_s,
            tau_l: self.tau_l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionSection {
    pub walk_sd: f64,
    pub drop_factor: f64,
    /// Cap on each drop; unset means the drop spans the short window.
    pub drop_duration_s: Option<f64>,
    /// Simulated time after the bootstrap window.
    pub duration_s: f64,
    /// Spacing of the detection-curve time grid.
    pub grid_step_s: f64,
    /// Also run honest miners alongside the attacks in `fig3`.
    pub honest_control: bool,
    pub params: Vec<ParamRow>,
}

impl Default for DetectionSection {
    fn default() -> Self {
        let b = BehaviorModel::honest();
        Self {
            walk_sd: b.walk_sd,
            drop_factor: b.drop_factor,
            drop_duration_s: b.drop_duration,
            duration_s: bonded_mining::YEAR,
            grid_step_s: bonded_mining::DAY,
            honest_control: true,
            params: PARAM_TABLE
                .iter()
                .map(|(q, p)| ParamRow {
                    fraction: *q,
                    n_s: p.n_s,
                    n_l: p.n_l,
                    tau_s: p.tau_s,
                    tau_l: p.tau_l,
                })
                .collect(),
        }
    }
}

/// Simulated miner behaviours of the detection experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Behavior {
    Honest,
    HonestWithDrops,
    ShortRange,
    LongRange,
}

impl Behavior {
    pub fn key(self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::HonestWithDrops => "honest-with-drops",
            Behavior::ShortRange => "short-range",
            Behavior::LongRange => "long-range",
        }
    }
}

impl DetectionSection {
    pub fn behavior(&self, b: Behavior) -> BehaviorModel {
        let mut m = match b {
            Behavior::Honest => BehaviorModel::honest(),
            Behavior::HonestWithDrops => BehaviorModel::honest_with_drops(),
            Behavior::ShortRange => BehaviorModel::short_range(),
            Behavior::LongRange => BehaviorModel::long_range(),
        };
        m.walk_sd = self.walk_sd;
        m.drop_factor = self.drop_factor;
        m.drop_duration = self.drop_duration_s;
        m
    }

    /// Detection setup for one table row and behaviour.
    pub fn config(
        &self,
        row: &ParamRow,
        b: Behavior,
        seed: u64,
        trials: usize,
        target: f64,
    ) -> CliResult<DetectionConfig> {
        let cfg = DetectionConfig {
            attacker_fraction: row.fraction,
            behavior: self.behavior(b),
            duration: self.duration_s,
            horizon_blocks: None,
            trials,
            seed,
            target,
            params: row.params(),
        };
        cfg.check().map_err(|e| CliError::Config(format!("detection: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleEntry {
    pub day: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpectedSection {
    pub miners: usize,
    pub available_hps: f64,
    pub history: usize,
    pub duration_s: f64,
    /// Cost tolerance of the single rule-comparison run.
    pub fig4_kappa: f64,
    /// Cost tolerances of the sweep.
    pub kappas: Vec<f64>,
    pub schedule: Vec<ScheduleEntry>,
}

impl Default for ExpectedSection {
    fn default() -> Self {
        let base = ExpectedTimeConfig::new(DaaKind::Bm, 0.25);
        Self {
            miners: base.miners,
            available_hps: base.available_hps,
            history: base.history,
            duration_s: base.duration,
            fig4_kappa: 0.25,
            kappas: vec![0.1, 0.25, 1.0],
            schedule: reference_schedule()
                .into_iter()
                .map(|(day, fraction)| ScheduleEntry { day, fraction })
                .collect(),
        }
    }
}

impl ExpectedSection {
    pub fn config(&self, daa: DaaKind, kappa: f64, net: &NetworkParams) -> CliResult<ExpectedTimeConfig> {
        let schedule = self.schedule.iter().map(|e| (e.day, e.fraction)).collect();
        let cfg = ExpectedTimeConfig {
            daa,
            miners: self.miners,
            available_hps: self.available_hps,
            behavior: BehaviorModel::preference_follower(schedule, kappa),
            target: net.target,
            mu: net.mu,
            history: self.history,
            duration: self.duration_s,
        };
        cfg.check().map_err(|e| CliError::Config(format!("expected: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvalueSection {
    /// Sequences per kind. Not scaled down at desk scale.
    pub trials: usize,
    /// Samples per sequence.
    pub samples: usize,
    pub walk_sd: f64,
}

impl Default for PvalueSection {
    fn default() -> Self {
        Self {
            trials: 1000,
            samples: 500,
            walk_sd: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateSection {
    /// Blocks CSV to test; relative paths resolve against the config file.
    pub blocks: Option<PathBuf>,
    /// Committed fraction selecting the table row, unless `params` is set.
    pub fraction: f64,
    pub params: Option<ParamRow>,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            blocks: None,
            fraction: 0.5,
            params: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbandonSection {
    pub fractions: Vec<f64>,
}

impl Default for AbandonSection {
    fn default() -> Self {
        Self {
            fractions: vec![0.01, 0.10, 0.25, 0.50],
        }
    }
}

/// A parsed configuration and the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
    pub path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<LoadedConfig> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|e| CliError::Config(format!("{}: not UTF-8: {e}", path.display())))?;
        let config = Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(LoadedConfig {
            config,
            sha256: sha256_hex(&bytes),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn check(&self) -> CliResult<()> {
        if self.trials == 0 || self.desk_trials == 0 {
            return Err(CliError::Config("trials and desk_trials must be positive".into()));
        }
        self.network.params()?;
        if self.detection.params.is_empty() {
            return Err(CliError::Config("detection.params is empty".into()));
        }
        for (i, row) in self.detection.params.iter().enumerate() {
            if !(MIN_FRACTION..=1.0).contains(&row.fraction) {
                return Err(CliError::Config(format!(
                    "detection.params[{i}].fraction = {} outside [{MIN_FRACTION}, 1]",
                    row.fraction
                )));
            }
            row.params()
                .check()
                .map_err(|e| CliError::Config(format!("detection.params[{i}]: {e}")))?;
        }
        if !(self.detection.grid_step_s > 0.0) {
            return Err(CliError::Config("detection.grid_step_s must be positive".into()));
        }
        if self.pvalues.samples == 0 || self.pvalues.trials == 0 {
            return Err(CliError::Config(
                "pvalues.samples and pvalues.trials must be positive".into(),
            ));
        }
        let net = self.network.params()?;
        self.expected.config(DaaKind::Bm, self.expected.fig4_kappa, &net)?;
        for (i, k) in self.expected.kappas.iter().enumerate() {
            if !(*k >= 0.0) {
                return Err(CliError::Config(format!(
                    "expected.kappas[{i}] = {k} must be nonnegative"
                )));
            }
        }
        if let Some(row) = &self.validate.params {
            row.params()
                .check()
                .map_err(|e| CliError::Config(format!("validate.params: {e}")))?;
        }
        Ok(())
    }

    /// Trial count: explicit override, else full or desk scale.
    pub fn trial_count(&self, override_trials: Option<usize>, full: bool) -> usize {
        override_trials.unwrap_or(if full { self.trials } else { self.desk_trials })
    }
}

impl LoadedConfig {
    /// The reference configuration, hashed as its TOML serialization.
    pub fn defaults() -> Self {
        let config = ExperimentConfig::default();
        let text = toml::to_string(&config).expect("default config serializes");
        Self {
            sha256: sha256_hex(text.as_bytes()),
            config,
            path: None,
        }
    }

    /// Resolves a path from the config relative to the config's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match (&self.path, p.is_relative()) {
            (Some(cfg), true) => cfg.parent().map_or_else(|| p.to_path_buf(), |d| d.join(p)),
            _ => p.to_path_buf(),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
