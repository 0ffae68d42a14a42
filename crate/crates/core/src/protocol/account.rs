use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{
    abandonment_threshold, constrain_commitment, reconcile_amount, BondState, Coins, NetworkParams, ProtocolEvent,
};
use crate::error::{domain, Error, Result};
use crate::validity::{valid, ReportedInterval, ValidityParams};

pub type MinerId = u32;

/// One mined block as seen by its miner's account.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    pub miner: MinerId,
    /// Seconds.
    pub timestamp: f64,
    /// Seconds since the miner's previous block (or bonding).
    pub inter_arrival: f64,
    /// Reported average hash rate over the interval, hashes per second.
    pub report: f64,
    /// Commitment for the miner's next interval, hashes per second.
    pub next_commitment: f64,
    /// Time-weighted network difficulty over the interval, hashes.
    pub avg_difficulty: f64,
    /// Refund paid out when this block was accepted.
    pub reconciliation: Coins,
}

/// A bond deposit and the interval it was made for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deposit {
    pub height: u64,
    pub amount: Coins,
    pub report: f64,
    pub commitment: f64,
}

/// Running coin totals of one account.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinTotals {
    pub deposited: Coins,
    pub refunded: Coins,
    /// Portion of reconciled deposits withheld for deviation.
    pub forfeited: Coins,
    pub slashed: Coins,
    pub burned: Coins,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinerAccount {
    id: MinerId,
    state: BondState,
    params: ValidityParams,
    deposits: VecDeque<Deposit>,
    /// Commitment each interval of the current bonding was mined under.
    commitments: Vec<f64>,
    reports: Vec<f64>,
    intervals: Vec<ReportedInterval>,
    blocks: Vec<BlockRecord>,
    commitment: f64,
    last_time: f64,
    totals: CoinTotals,
}

impl MinerAccount {
    /// A new bootstrapping account committing `commitment` from time `now`.
    pub fn bond(id: MinerId, commitment: f64, now: f64, params: ValidityParams) -> Result<(Self, ProtocolEvent)> {
        params.check()?;
        if !(commitment > 0.0) || !commitment.is_finite() {
            return Err(domain(format!("initial commitment {commitment} must be positive")));
        }
        let acct = Self {
            id,
            state: BondState::Bootstrapping,
            params,
            deposits: VecDeque::new(),
            commitments: Vec::new(),
            reports: Vec::new(),
            intervals: Vec::new(),
            blocks: Vec::new(),
            commitment,
            last_time: now,
            totals: CoinTotals::default(),
        };
        let ev = ProtocolEvent::Bond {
            miner: id,
            time_s: now,
            commitment_hps: commitment,
        };
        Ok((acct, ev))
    }

    pub fn id(&self) -> MinerId {
        self.id
    }

    pub fn state(&self) -> BondState {
        self.state
    }

    pub fn params(&self) -> &ValidityParams {
        &self.params
    }

    /// Commitment for the interval in progress.
    pub fn commitment(&self) -> f64 {
        self.commitment
    }

    /// Time of the last block, or of bonding before the first block.
    pub fn last_time(&self) -> f64 {
        self.last_time
    }

    pub fn deposits(&self) -> &VecDeque<Deposit> {
        &self.deposits
    }

    pub fn blocks(&self) -> &[BlockRecord] {
        &self.blocks
    }

    pub fn commitments(&self) -> &[f64] {
        &self.commitments
    }

    pub fn reports(&self) -> &[f64] {
        &self.reports
    }

    pub fn intervals(&self) -> &[ReportedInterval] {
        &self.intervals
    }

    pub fn totals(&self) -> &CoinTotals {
        &self.totals
    }

    /// Bond currently in the pool.
    pub fn locked(&self) -> Coins {
        self.deposits.iter().map(|d| d.amount).sum()
    }

    /// `deposited == refunded + forfeited + slashed + burned + locked`.
    pub fn is_conserved(&self) -> bool {
        let t = &self.totals;
        t.deposited == t.refunded + t.forfeited + t.slashed + t.burned + self.locked()
    }

    fn transition(&mut self, to: BondState, events: &mut Vec<ProtocolEvent>) -> Result<()> {
        if !self.state.can_transition(to) {
            return Err(Error::Invariant(format!(
                "illegal transition {:?} -> {to:?}",
                self.state
            )));
        }
        events.push(ProtocolEvent::Transition {
            miner: self.id,
            from: self.state,
            to,
        });
        self.state = to;
        Ok(())
    }

    fn forfeit_all(&mut self) -> Coins {
        let amount = self.locked();
        self.deposits.clear();
        self.commitment = 0.0;
        amount
    }

    fn reconcile_front(&mut self, events: &mut Vec<ProtocolEvent>) -> Result<Coins> {
        let dep = self
            .deposits
            .pop_front()
            .ok_or_else(|| Error::Invariant("reconcile with no deposits".into()))?;
        let refund = reconcile_amount(dep.report, dep.commitment, dep.amount)?;
        let forfeited = dep.amount - refund;
        self.totals.refunded += refund;
        self.totals.forfeited += forfeited;
        events.push(ProtocolEvent::Reconcile {
            miner: self.id,
            deposit_height: dep.height,
            refund,
            forfeited,
        });
        Ok(refund)
    }

    /// Applies a block mined by this miner.
    ///
    /// `block.next_commitment` is the proposal; the stored record carries the
    /// commitment after the growth constraint. Once fully bonded, `Valid`
    /// runs on every block: failure slashes all locked bond and divests the
    /// miner, success refunds deposits beyond the window in FIFO order.
    pub fn on_block_mined(&mut self, block: BlockRecord, net: &NetworkParams) -> Result<Vec<ProtocolEvent>> {
        if !self.state.is_active() {
            return Err(Error::ProtocolViolation(format!(
                "miner {} mined a block while {:?}",
                self.id, self.state
            )));
        }
        if block.miner != self.id {
            return Err(Error::ProtocolViolation(format!(
                "block of miner {} applied to account {}",
                block.miner, self.id
            )));
        }
        if let Some(prev) = self.blocks.last() {
            if !(block.timestamp > prev.timestamp) || block.height <= prev.height {
                return Err(Error::ProtocolViolation(
                    "block is not after the miner's previous block".into(),
                ));
            }
        }
        if !(block.next_commitment > 0.0) || !block.next_commitment.is_finite() {
            return Err(Error::ProtocolViolation(format!(
                "next commitment {} must be positive; divest to stop mining",
                block.next_commitment
            )));
        }
        let interval = ReportedInterval::new(block.inter_arrival, block.report, block.avg_difficulty)?;

        let mut events = Vec::new();
        let committed = self.commitment;
        self.deposits.push_back(Deposit {
            height: block.height,
            amount: net.bond,
            report: block.report,
            commitment: committed,
        });
        self.totals.deposited += net.bond;
        events.push(ProtocolEvent::Deposit {
            miner: self.id,
            height: block.height,
            amount: net.bond,
        });
        self.intervals.push(interval);
        self.commitments.push(committed);
        self.reports.push(block.report);
        self.last_time = block.timestamp;

        if self.state == BondState::Bootstrapping && self.deposits.len() >= self.params.n_l {
            self.transition(BondState::FullyBonded, &mut events)?;
        }

        let mut record = block;
        record.reconciliation = Coins::ZERO;
        if self.state == BondState::FullyBonded {
            if !valid(&self.intervals, &self.params)? {
                let amount = self.forfeit_all();
                self.totals.slashed += amount;
                record.next_commitment = 0.0;
                events.push(ProtocolEvent::Block {
                    miner: self.id,
                    height: block.height,
                    time_s: block.timestamp,
                    report_hps: block.report,
                    next_commitment_hps: 0.0,
                });
                events.push(ProtocolEvent::Slash {
                    miner: self.id,
                    height: Some(block.height),
                    amount,
                });
                self.transition(BondState::Divested, &mut events)?;
                self.blocks.push(record);
                return Ok(events);
            }
            while self.deposits.len() > self.params.n_l {
                record.reconciliation += self.reconcile_front(&mut events)?;
            }
            let start = self.commitments.len().saturating_sub(self.params.n_l);
            record.next_commitment = constrain_commitment(block.next_commitment, &self.commitments[start..], net.mu)?;
        }
        self.commitment = record.next_commitment;
        events.push(ProtocolEvent::Block {
            miner: self.id,
            height: block.height,
            time_s: block.timestamp,
            report_hps: block.report,
            next_commitment_hps: record.next_commitment,
        });
        self.blocks.push(record);
        Ok(events)
    }

    /// Whether the miner has been silent longer than the abandonment
    /// quantile of their committed inter-block time.
    pub fn check_abandonment(&self, now: f64, total_commitment: f64, net: &NetworkParams) -> Result<bool> {
        if !self.state.is_active() {
            return Err(Error::ProtocolViolation(format!(
                "abandonment check on miner {} while {:?}",
                self.id, self.state
            )));
        }
        let q = abandonment_threshold(self.commitment, total_commitment, net)?;
        Ok(now - self.last_time > q)
    }

    /// Burns all locked bond and moves the miner through Abandoned to
    /// Divested.
    pub fn abandon(&mut self, now: f64) -> Result<Vec<ProtocolEvent>> {
        let mut events = Vec::new();
        self.transition(BondState::Abandoned, &mut events)?;
        let burned = self.forfeit_all();
        self.totals.burned += burned;
        events.push(ProtocolEvent::Abandon {
            miner: self.id,
            time_s: now,
            burned,
        });
        self.transition(BondState::Divested, &mut events)?;
        Ok(events)
    }

    /// Voluntary exit of a fully bonded miner.
    ///
    /// `Valid` runs once over the trailing window. On success every
    /// remaining deposit is reconciled against its own report and
    /// commitment; on failure everything is slashed.
    pub fn divest(&mut self, now: f64) -> Result<(Vec<Coins>, Vec<ProtocolEvent>)> {
        if self.state != BondState::FullyBonded {
            return Err(Error::ProtocolViolation(format!(
                "miner {} cannot divest while {:?}",
                self.id, self.state
            )));
        }
        let mut events = Vec::new();
        let mut payments = Vec::new();
        if valid(&self.intervals, &self.params)? {
            while !self.deposits.is_empty() {
                payments.push(self.reconcile_front(&mut events)?);
            }
            self.commitment = 0.0;
            events.push(ProtocolEvent::Divest {
                miner: self.id,
                time_s: now,
                refunded: payments.iter().copied().sum(),
            });
        } else {
            let amount = self.forfeit_all();
            self.totals.slashed += amount;
            events.push(ProtocolEvent::Slash {
                miner: self.id,
                height: None,
                amount,
            });
        }
        self.transition(BondState::Divested, &mut events)?;
        Ok((payments, events))
    }

    /// Re-enters bootstrapping after divestment.
    pub fn rebond(&mut self, commitment: f64, now: f64, params: ValidityParams) -> Result<Vec<ProtocolEvent>> {
        if self.state != BondState::Divested {
            return Err(Error::ProtocolViolation(format!(
                "miner {} cannot bond while {:?}",
                self.id, self.state
            )));
        }
        let (fresh, ev) = Self::bond(self.id, commitment, now, params)?;
        let mut events = vec![ev];
        self.transition(BondState::Bootstrapping, &mut events)?;
        self.params = fresh.params;
        self.commitment = fresh.commitment;
        self.last_time = now;
        self.commitments.clear();
        self.reports.clear();
        self.intervals.clear();
        Ok(events)
    }

    /// Replaces the window parameters after the miner's share of the
    /// network changed, moving between Bootstrapping and FullyBonded as the
    /// deposit count requires.
    pub fn set_params(&mut self, params: ValidityParams) -> Result<Vec<ProtocolEvent>> {
        params.check()?;
        self.params = params;
        let mut events = Vec::new();
        let full = self.deposits.len() >= params.n_l;
        match self.state {
            BondState::Bootstrapping if full => self.transition(BondState::FullyBonded, &mut events)?,
            BondState::FullyBonded if !full => self.transition(BondState::Bootstrapping, &mut events)?,
            _ => {}
        }
        Ok(events)
    }
}
