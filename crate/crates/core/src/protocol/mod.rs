//! Bond accounting: deposits, reconciliation, bond states, abandonment and
//! commitment constraints.

mod account;
mod events;
mod network;

pub use account::{BlockRecord, Deposit, MinerAccount, MinerId};
pub use events::{read_events, EventLog, ProtocolEvent};
pub use network::BondedNetwork;

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Base units per coin.
pub const COIN: u64 = 100_000_000;

/// An amount of coins in integer base units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coins(pub u64);

impl Coins {
    pub const ZERO: Coins = Coins(0);

    pub fn from_coins(c: f64) -> Result<Self> {
        if !(c >= 0.0) || !(c * COIN as f64 <= u64::MAX as f64) {
            return Err(domain(format!("coin amount {c} out of range")));
        }
        Ok(Coins((c * COIN as f64).round() as u64))
    }

    pub fn as_coins(self) -> f64 {
        self.0 as f64 / COIN as f64
    }

    pub fn units(self) -> u64 {
        self.0
    }

    pub fn times(self, k: u64) -> Coins {
        Coins(self.0 * k)
    }
}

impl Add for Coins {
    type Output = Coins;
    fn add(self, rhs: Coins) -> Coins {
        Coins(self.0 + rhs.0)
    }
}

impl AddAssign for Coins {
    fn add_assign(&mut self, rhs: Coins) {
        self.0 += rhs.0;
    }
}

impl Sub for Coins {
    type Output = Coins;
    fn sub(self, rhs: Coins) -> Coins {
        Coins(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Coins {
    fn sum<I: Iterator<Item = Coins>>(iter: I) -> Coins {
        iter.fold(Coins::ZERO, Add::add)
    }
}

impl fmt::Display for Coins {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:08}", self.0 / COIN, self.0 % COIN)
    }
}

/// Protocol constants shared by every miner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    /// Target seconds between blocks.
    pub target: f64,
    /// Bond deposited with each mined block.
    pub bond: Coins,
    /// Maximum multiple of the trailing mean commitment.
    pub mu: f64,
    /// Maximum share of total commitment from bootstrapping miners.
    pub gamma: f64,
    /// Quantile probability of the abandonment test.
    pub abandon_p: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            target: 600.0,
            bond: Coins(COIN),
            mu: 2.0,
            gamma: 0.05,
            abandon_p: 0.99999,
        }
    }
}

impl NetworkParams {
    pub fn check(&self) -> Result<()> {
        if !(self.target > 0.0) {
            return Err(Error::Config(format!("target {} must be positive", self.target)));
        }
        if !(self.mu >= 1.0) {
            return Err(Error::Config(format!("mu {} must be at least 1", self.mu)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if !(self.abandon_p > 0.0 && self.abandon_p < 1.0) {
            return Err(Error::Config(format!("abandon_p {} outside (0, 1)", self.abandon_p)));
        }
        Ok(())
    }
}

/// Bond state of a miner account.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondState {
    Bootstrapping,
    FullyBonded,
    Divested,
    Abandoned,
}

impl BondState {
    /// Whether `self -> to` is an edge of the state machine.
    pub fn can_transition(self, to: BondState) -> bool {
        use BondState::*;
        matches!(
            (self, to),
            (Bootstrapping, FullyBonded)
                | (FullyBonded, Bootstrapping)
                | (Bootstrapping, Abandoned)
                | (FullyBonded, Abandoned)
                | (Abandoned, Divested)
                | (FullyBonded, Divested)
                | (Divested, Bootstrapping)
        )
    }

    /// Whether the miner is in the mining set.
    pub fn is_active(self) -> bool {
        matches!(self, BondState::Bootstrapping | BondState::FullyBonded)
    }
}

/// Refunded fraction `1 - min{1, |r - c| / c}` of a deposit.
pub fn reconcile_fraction(report: f64, commitment: f64) -> Result<f64> {
    if !(commitment > 0.0) || !commitment.is_finite() {
        return Err(domain(format!("commitment {commitment} must be positive")));
    }
    if !(report >= 0.0) || !report.is_finite() {
        return Err(domain(format!("report {report} must be nonnegative")));
    }
    Ok(1.0 - ((report - commitment).abs() / commitment).min(1.0))
}

/// Refund of `bond` for an interval with report `report` against
/// commitment `commitment`, rounded to the nearest base unit.
pub fn reconcile_amount(report: f64, commitment: f64, bond: Coins) -> Result<Coins> {
    let frac = reconcile_fraction(report, commitment)?;
    let units = (bond.0 as f64 * frac).round() as u64;
    Ok(Coins(units.min(bond.0)))
}

/// `min(proposed, mu * mean(history))`; reductions are never limited.
pub fn constrain_commitment(proposed: f64, history: &[f64], mu: f64) -> Result<f64> {
    if !(proposed >= 0.0) || !proposed.is_finite() {
        return Err(domain(format!("proposed commitment {proposed} must be nonnegative")));
    }
    if history.is_empty() {
        return Err(Error::Invariant("commitment history is empty".into()));
    }
    let mean = history.iter().sum::<f64>() / history.len() as f64;
    Ok(proposed.min(mu * mean).max(0.0))
}

/// Scales bootstrapping commitments down proportionately so they make up at
/// most `gamma * total`.
pub fn scale_bootstrapping(boot: &[f64], total: f64, gamma: f64) -> Vec<f64> {
    let sum: f64 = boot.iter().sum();
    let cap = gamma * total;
    if sum > cap && sum > 0.0 {
        let k = cap / sum;
        boot.iter().map(|c| c * k).collect()
    } else {
        boot.to_vec()
    }
}

/// Seconds of silence after which a miner committed to `commitment` out of
/// `total_commitment` is considered to have abandoned mining.
pub fn abandonment_threshold(commitment: f64, total_commitment: f64, net: &NetworkParams) -> Result<f64> {
    if !(commitment > 0.0) || !(total_commitment >= commitment) {
        return Err(domain(format!(
            "commitment {commitment} must be positive and at most the total {total_commitment}"
        )));
    }
    crate::stats::exp_quantile(net.abandon_p, net.target * total_commitment / commitment)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconcile_table() {
        let b = Coins::from_coins(10.0).unwrap();
        assert_eq!(reconcile_amount(100.0, 100.0, b).unwrap(), b);
        assert_eq!(
            reconcile_amount(50.0, 100.0, b).unwrap(),
            Coins::from_coins(5.0).unwrap()
        );
        assert_eq!(reconcile_amount(250.0, 100.0, b).unwrap(), Coins::ZERO);
        for (ratio, want) in [(0.0, 0.0), (0.5, 0.5), (1.0, 1.0), (1.5, 0.5), (2.5, 0.0)] {
            assert_eq!(reconcile_fraction(ratio * 100.0, 100.0).unwrap(), want);
        }
        assert!(reconcile_amount(1.0, 0.0, b).is_err());
        assert!(reconcile_amount(1.0, -3.0, b).is_err());
    }

    #[test]
    fn constrain() {
        let h = [50.0, 150.0];
        assert_eq!(constrain_commitment(300.0, &h, 2.0).unwrap(), 200.0);
        assert_eq!(constrain_commitment(150.0, &h, 2.0).unwrap(), 150.0);
        assert_eq!(constrain_commitment(0.0, &h, 2.0).unwrap(), 0.0);
        assert!(matches!(constrain_commitment(1.0, &[], 2.0), Err(Error::Invariant(_))));
    }

    #[test]
    fn bootstrapping_cap() {
        assert_eq!(scale_bootstrapping(&[4.0, 6.0], 100.0, 0.05), vec![2.0, 3.0]);
        assert_eq!(scale_bootstrapping(&[1.0, 2.0], 100.0, 0.05), vec![1.0, 2.0]);
        assert_eq!(scale_bootstrapping(&[0.0], 100.0, 0.05), vec![0.0]);
        assert!(scale_bootstrapping(&[], 100.0, 0.05).is_empty());
    }

    #[test]
    fn abandonment_thresholds() {
        let net = NetworkParams::default();
        let ten = abandonment_threshold(10.0, 100.0, &net).unwrap();
        assert!((19.0..=20.0).contains(&(ten / 3600.0)), "{}", ten / 3600.0);
        let one = abandonment_threshold(1.0, 100.0, &net).unwrap();
        assert!((one / ten - 10.0).abs() < 1e-12);
        assert!((one / 3600.0 - 191.88).abs() < 0.01, "{}", one / 3600.0);
        assert!(abandonment_threshold(0.0, 100.0, &net).is_err());
    }

    #[test]
    fn state_edges() {
        use BondState::*;
        let all = [Bootstrapping, FullyBonded, Divested, Abandoned];
        let legal: Vec<(BondState, BondState)> = all
            .iter()
            .flat_map(|&a| all.iter().map(move |&b| (a, b)))
            .filter(|(a, b)| a.can_transition(*b))
            .collect();
        assert_eq!(legal.len(), 7);
        assert!(!Divested.can_transition(FullyBonded));
        assert!(!Abandoned.can_transition(Bootstrapping));
        assert!(!Bootstrapping.can_transition(Divested));
    }

    #[test]
    fn coins_display_and_params() {
        assert_eq!(Coins(150_000_000).to_string(), "1.50000000");
        assert!(Coins::from_coins(-1.0).is_err());
        assert!(NetworkParams::default().check().is_ok());
        let bad = NetworkParams {
            mu: 0.5,
            ..Default::default()
        };
        assert!(bad.check().is_err());
    }
}
