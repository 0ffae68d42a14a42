//! Line-delimited JSON audit log of protocol events.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{BondState, Coins, MinerId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProtocolEvent {
    /// A miner enters bootstrapping with an initial commitment.
    Bond {
        miner: MinerId,
        time_s: f64,
        commitment_hps: f64,
    },
    Deposit {
        miner: MinerId,
        height: u64,
        amount: Coins,
    },
    Block {
        miner: MinerId,
        height: u64,
        time_s: f64,
        report_hps: f64,
        next_commitment_hps: f64,
    },
    /// A deposit leaves the pool; `forfeited` is the part not refunded.
    Reconcile {
        miner: MinerId,
        deposit_height: u64,
        refund: Coins,
        forfeited: Coins,
    },
    Slash {
        miner: MinerId,
        height: Option<u64>,
        amount: Coins,
    },
    Abandon {
        miner: MinerId,
        time_s: f64,
        burned: Coins,
    },
    Divest {
        miner: MinerId,
        time_s: f64,
        refunded: Coins,
    },
    Transition {
        miner: MinerId,
        from: BondState,
        to: BondState,
    },
}

/// Collects events and writes them one JSON object per line.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Vec<ProtocolEvent>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, e: ProtocolEvent) {
        self.events.push(e);
    }

    pub fn extend(&mut self, es: impl IntoIterator<Item = ProtocolEvent>) {
        self.events.extend(es);
    }

    pub fn events(&self) -> &[ProtocolEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parses a line-delimited event log; blank lines are skipped.
pub fn read_events<R: BufRead>(r: R) -> Result<Vec<ProtocolEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Config(format!("event log line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| Error::Config(format!("event log line {}: {e}", i + 1)))?;
        out.push(e);
    }
    Ok(out)
}
