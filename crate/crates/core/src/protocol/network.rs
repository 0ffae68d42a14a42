use std::collections::BTreeMap;

use super::{
    scale_bootstrapping, BlockRecord, BondState, Coins, EventLog, MinerAccount, MinerId, NetworkParams, ProtocolEvent,
};
use crate::daa::bm_difficulty;
use crate::error::{Error, Result};
use crate::validity::{DifficultyTimeline, ValidityParams};

/// All bonded miners of one chain, driven by a single serialized stream of
/// bonds, blocks, divestments and clock ticks.
#[derive(Debug, Clone)]
pub struct BondedNetwork {
    net: NetworkParams,
    accounts: BTreeMap<MinerId, MinerAccount>,
    timeline: DifficultyTimeline,
    height: u64,
    now: f64,
    log: EventLog,
}

impl BondedNetwork {
    pub fn new(net: NetworkParams) -> Result<Self> {
        net.check()?;
        Ok(Self {
            net,
            accounts: BTreeMap::new(),
            timeline: DifficultyTimeline::new(),
            height: 0,
            now: 0.0,
            log: EventLog::new(),
        })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.net
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn account(&self, id: MinerId) -> Option<&MinerAccount> {
        self.accounts.get(&id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &MinerAccount> {
        self.accounts.values()
    }

    /// Commitments counted toward difficulty, with bootstrapping miners cut
    /// down to the `gamma` share.
    pub fn effective_commitments(&self) -> Vec<(MinerId, f64)> {
        let active: Vec<&MinerAccount> = self.accounts.values().filter(|a| a.state().is_active()).collect();
        let total: f64 = active.iter().map(|a| a.commitment()).sum();
        let boot: Vec<f64> = active
            .iter()
            .filter(|a| a.state() == BondState::Bootstrapping)
            .map(|a| a.commitment())
            .collect();
        let mut scaled = scale_bootstrapping(&boot, total, self.net.gamma).into_iter();
        active
            .iter()
            .map(|a| {
                let c = if a.state() == BondState::Bootstrapping {
                    scaled.next().unwrap_or(0.0)
                } else {
                    a.commitment()
                };
                (a.id(), c)
            })
            .collect()
    }

    pub fn total_commitment(&self) -> f64 {
        self.effective_commitments().iter().map(|(_, c)| c).sum()
    }

    /// Difficulty in force now, if anyone is committed.
    pub fn difficulty(&self) -> Option<f64> {
        self.timeline.at(self.now)
    }

    fn retarget(&mut self) -> Result<()> {
        let total = self.total_commitment();
        if total > 0.0 {
            let d = bm_difficulty(total, self.net.target)?;
            if self.timeline.at(self.now) != Some(d) {
                self.timeline.push(self.now, d)?;
            }
        }
        Ok(())
    }

    fn advance(&mut self, time: f64) -> Result<()> {
        if !(time >= self.now) || !time.is_finite() {
            return Err(Error::ProtocolViolation(format!("time {time} is before {}", self.now)));
        }
        self.now = time;
        Ok(())
    }

    /// Bonds a new miner, or re-bonds a divested one, at time `time`.
    pub fn bond(&mut self, id: MinerId, commitment: f64, params: ValidityParams, time: f64) -> Result<()> {
        self.advance(time)?;
        let events = match self.accounts.get_mut(&id) {
            Some(acct) => acct.rebond(commitment, time, params)?,
            None => {
                let (acct, ev) = MinerAccount::bond(id, commitment, time, params)?;
                self.accounts.insert(id, acct);
                vec![ev]
            }
        };
        self.log.extend(events);
        self.retarget()
    }

    /// Applies a block by `miner` at `time`, then runs the abandonment test
    /// for every active miner and retargets.
    pub fn mine(&mut self, miner: MinerId, time: f64, report: f64, proposed: f64) -> Result<()> {
        if !(time > self.now) {
            return Err(Error::ProtocolViolation(format!(
                "block time {time} is not after {}",
                self.now
            )));
        }
        let acct = self
            .accounts
            .get(&miner)
            .ok_or_else(|| Error::ProtocolViolation(format!("unknown miner {miner}")))?;
        let start = acct.last_time();
        let avg = self.timeline.average(start, time)?;
        let block = BlockRecord {
            height: self.height + 1,
            miner,
            timestamp: time,
            inter_arrival: time - start,
            report,
            next_commitment: proposed,
            avg_difficulty: avg,
            reconciliation: Coins::ZERO,
        };
        let acct = self.accounts.get_mut(&miner).expect("checked above");
        let events = acct.on_block_mined(block, &self.net)?;
        self.height += 1;
        self.now = time;
        self.log.extend(events);
        self.check_abandonment()?;
        self.retarget()
    }

    /// Voluntary divestment of a fully bonded miner.
    pub fn divest(&mut self, miner: MinerId, time: f64) -> Result<Vec<Coins>> {
        self.advance(time)?;
        let acct = self
            .accounts
            .get_mut(&miner)
            .ok_or_else(|| Error::ProtocolViolation(format!("unknown miner {miner}")))?;
        let (payments, events) = acct.divest(time)?;
        self.log.extend(events);
        self.retarget()?;
        Ok(payments)
    }

    /// Advances the clock without a block and runs the abandonment test.
    pub fn tick(&mut self, time: f64) -> Result<()> {
        self.advance(time)?;
        self.check_abandonment()?;
        self.retarget()
    }

    fn check_abandonment(&mut self) -> Result<()> {
        let total: f64 = self
            .accounts
            .values()
            .filter(|a| a.state().is_active())
            .map(|a| a.commitment())
            .sum();
        let now = self.now;
        let mut flagged = Vec::new();
        for a in self.accounts.values().filter(|a| a.state().is_active()) {
            if a.check_abandonment(now, total, &self.net)? {
                flagged.push(a.id());
            }
        }
        for id in flagged {
            let acct = self.accounts.get_mut(&id).expect("flagged from map");
            let events = acct.abandon(now)?;
            self.log.extend(events);
        }
        Ok(())
    }

    /// Coins deposited minus everything paid out, burned or still locked,
    /// summed over accounts. Zero unless the ledger is broken.
    pub fn conservation_gap(&self) -> i128 {
        self.accounts
            .values()
            .map(|a| {
                let t = a.totals();
                i128::from(t.deposited.0) - i128::from((t.refunded + t.forfeited + t.slashed + t.burned + a.locked()).0)
            })
            .sum()
    }

    /// Replaces a miner's window parameters.
    pub fn set_params(&mut self, miner: MinerId, params: ValidityParams) -> Result<()> {
        let acct = self
            .accounts
            .get_mut(&miner)
            .ok_or_else(|| Error::ProtocolViolation(format!("unknown miner {miner}")))?;
        let events = acct.set_params(params)?;
        self.log.extend(events);
        self.retarget()
    }

    pub fn events(&self) -> &[ProtocolEvent] {
        self.log.events()
    }
}
